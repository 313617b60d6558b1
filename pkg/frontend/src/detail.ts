import { reviewBadge } from "./queue.js";
import { tripSketch } from "./sketch.js";
import type { PolicyDetail, TripDetail } from "./types.js";

// Policy drill-down: counts and review controls, the trip list, and the
// trace sketch for the selected trip.

export interface DetailViewState {
  policy: PolicyDetail | null;
  error: string | null;
  selectedTrip: TripDetail | null;
  reviewPending: boolean;
  staleSnapshot: string | null; // latest snapshot date when newer than ours
  loading: boolean;
  reviewer: string;
}

export interface DetailHandlers {
  onBack(): void;
  onSelectTrip(tripId: string): void;
  onReview(verdict: "CONFIRMED_DELIVERY" | "NOT_DELIVERY"): void;
  onReload(): void;
  onReviewerChange(name: string): void;
}

function formatTime(epoch: number): string {
  return new Date(epoch * 1000).toISOString().replace("T", " ").slice(0, 16);
}

export function renderDetail(
  container: HTMLElement,
  state: DetailViewState,
  handlers: DetailHandlers,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  container.className = "detail-view";

  const back = doc.createElement("a");
  back.href = "#/";
  back.className = "back-link";
  back.textContent = "← queue";
  back.addEventListener("click", (event) => {
    event.preventDefault();
    handlers.onBack();
  });
  container.appendChild(back);

  if (state.error !== null) {
    const banner = doc.createElement("div");
    banner.className = "error-banner";
    banner.textContent = state.error;
    container.appendChild(banner);
    return;
  }
  if (state.loading || !state.policy) {
    const loading = doc.createElement("div");
    loading.className = "loading";
    loading.textContent = "Loading…";
    container.appendChild(loading);
    return;
  }

  const { policy, snapshot_date, trips } = state.policy;

  if (state.staleSnapshot) {
    const stale = doc.createElement("div");
    stale.className = "stale-banner";
    const msg = doc.createElement("span");
    msg.textContent =
      `Snapshot ${state.staleSnapshot} is now current; ` +
      `this view was loaded from ${snapshot_date}.`;
    stale.appendChild(msg);
    const reload = doc.createElement("button");
    reload.textContent = "Reload";
    reload.addEventListener("click", () => handlers.onReload());
    stale.appendChild(reload);
    container.appendChild(stale);
  }

  const header = doc.createElement("div");
  header.className = "policy-header";
  const title = doc.createElement("h1");
  title.textContent = policy.policy_id;
  header.appendChild(title);
  header.appendChild(reviewBadge(doc, policy.last_review));

  const facts = doc.createElement("div");
  facts.className = "policy-facts";
  facts.textContent =
    `priority ${policy.score.toFixed(1)} · ` +
    `${policy.y} of ${policy.x} trips flagged · ` +
    `window ${formatTime(policy.window_start)} to ` +
    `${formatTime(policy.window_end)} · snapshot ${snapshot_date}`;
  header.appendChild(facts);

  const actions = doc.createElement("div");
  actions.className = "review-actions";
  const reviewer = doc.createElement("input");
  reviewer.type = "text";
  reviewer.placeholder = "reviewer";
  reviewer.value = state.reviewer;
  reviewer.addEventListener("change", () =>
    handlers.onReviewerChange(reviewer.value),
  );
  actions.appendChild(reviewer);
  const confirm = doc.createElement("button");
  confirm.className = "confirm";
  confirm.textContent = "Confirm delivery";
  confirm.disabled = state.reviewPending;
  confirm.addEventListener("click", () =>
    handlers.onReview("CONFIRMED_DELIVERY"),
  );
  const reject = doc.createElement("button");
  reject.className = "reject";
  reject.textContent = "Not delivery";
  reject.disabled = state.reviewPending;
  reject.addEventListener("click", () => handlers.onReview("NOT_DELIVERY"));
  actions.appendChild(confirm);
  actions.appendChild(reject);
  header.appendChild(actions);
  container.appendChild(header);

  const layout = doc.createElement("div");
  layout.className = "detail-layout";

  const table = doc.createElement("table");
  table.className = "trips-table";
  const thead = doc.createElement("thead");
  const headRow = doc.createElement("tr");
  for (const label of ["Trip end", "P(delivery)", "Label"]) {
    const th = doc.createElement("th");
    th.textContent = label;
    headRow.appendChild(th);
  }
  thead.appendChild(headRow);
  table.appendChild(thead);
  const tbody = doc.createElement("tbody");
  for (const trip of trips) {
    const tr = doc.createElement("tr");
    tr.dataset.trip = trip.trip_id;
    if (state.selectedTrip?.trip_id === trip.trip_id) {
      tr.classList.add("selected");
    }
    tr.addEventListener("click", () => handlers.onSelectTrip(trip.trip_id));
    const end = doc.createElement("td");
    end.textContent = formatTime(trip.trip_end_time);
    tr.appendChild(end);
    const prob = doc.createElement("td");
    prob.textContent = trip.probability.toFixed(3);
    tr.appendChild(prob);
    const label = doc.createElement("td");
    const flag = doc.createElement("span");
    flag.className = trip.label === 1 ? "badge flagged" : "badge plain";
    flag.textContent = trip.label === 1 ? "delivery-like" : "ordinary";
    label.appendChild(flag);
    tr.appendChild(label);
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  layout.appendChild(table);

  const panel = doc.createElement("div");
  panel.className = "sketch-panel";
  if (state.selectedTrip) {
    panel.appendChild(tripSketch(state.selectedTrip, doc));
    const legend = doc.createElement("div");
    legend.className = "legend";
    legend.textContent =
      "stops: red commercial, blue residential, green home; " +
      "radius grows with time stopped";
    panel.appendChild(legend);
  } else {
    const hint = doc.createElement("div");
    hint.className = "sketch-hint";
    hint.textContent = "Select a trip to see its trace.";
    panel.appendChild(hint);
  }
  layout.appendChild(panel);
  container.appendChild(layout);
}
