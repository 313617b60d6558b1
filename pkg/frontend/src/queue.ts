import type { QueuePage, QueueRow, Review } from "./types.js";

// Ranked queue table.  Rows render in server order by default; header
// clicks sort the current page client-side without re-querying.  All
// numbers come straight from the payload.

export type SortKey = "policy_id" | "score" | "x" | "y";

export interface QueueSort {
  key: SortKey;
  dir: 1 | -1;
}

export interface QueueViewState {
  page: QueuePage | null;
  error: string | null;
  sort: QueueSort | null;
  unreviewedOnly: boolean;
  loading: boolean;
}

export interface QueueHandlers {
  onOpenPolicy(policyId: string): void;
  onPageChange(page: number): void;
  onToggleUnreviewed(on: boolean): void;
  onSort(key: SortKey): void;
  onRetry(): void;
}

export function reviewBadge(doc: Document, review: Review | null): HTMLElement {
  const badge = doc.createElement("span");
  if (!review) {
    badge.className = "badge unreviewed";
    badge.textContent = "unreviewed";
  } else if (review.verdict === "CONFIRMED_DELIVERY") {
    badge.className = "badge confirmed";
    badge.textContent = "confirmed";
  } else {
    badge.className = "badge rejected";
    badge.textContent = "rejected";
  }
  return badge;
}

function sortedRows(page: QueuePage, sort: QueueSort | null): QueueRow[] {
  const rows = [...page.rows];
  if (!sort) return rows;
  rows.sort((a, b) => {
    const va = a[sort.key];
    const vb = b[sort.key];
    const cmp = va < vb ? -1 : va > vb ? 1 : 0;
    return cmp * sort.dir;
  });
  return rows;
}

const COLUMNS: { key: SortKey | null; label: string }[] = [
  { key: null, label: "#" },
  { key: "policy_id", label: "Policy" },
  { key: "score", label: "Priority" },
  { key: "x", label: "Trips" },
  { key: "y", label: "Flagged" },
  { key: null, label: "Review" },
];

export function renderQueue(
  container: HTMLElement,
  state: QueueViewState,
  handlers: QueueHandlers,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  container.className = "queue-view";

  const bar = doc.createElement("div");
  bar.className = "toolbar";
  const heading = doc.createElement("h1");
  heading.textContent = state.page
    ? `Ranked queue — snapshot ${state.page.date}`
    : "Ranked queue";
  bar.appendChild(heading);

  const toggleLabel = doc.createElement("label");
  toggleLabel.className = "unreviewed-toggle";
  const toggle = doc.createElement("input");
  toggle.type = "checkbox";
  toggle.checked = state.unreviewedOnly;
  toggle.addEventListener("change", () =>
    handlers.onToggleUnreviewed(toggle.checked),
  );
  toggleLabel.appendChild(toggle);
  toggleLabel.appendChild(doc.createTextNode(" unreviewed only"));
  bar.appendChild(toggleLabel);
  container.appendChild(bar);

  if (state.error !== null) {
    const banner = doc.createElement("div");
    banner.className = "error-banner";
    const msg = doc.createElement("span");
    msg.textContent = state.error;
    banner.appendChild(msg);
    const retry = doc.createElement("button");
    retry.className = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => handlers.onRetry());
    banner.appendChild(retry);
    container.appendChild(banner);
    return;
  }
  if (state.loading || !state.page) {
    const loading = doc.createElement("div");
    loading.className = "loading";
    loading.textContent = "Loading…";
    container.appendChild(loading);
    return;
  }

  const page = state.page;
  if (page.total === 0) {
    const empty = doc.createElement("div");
    empty.className = "empty-state";
    empty.textContent = state.unreviewedOnly
      ? "Every ranked policy in this snapshot has been reviewed."
      : "No ranked policies in this snapshot.";
    container.appendChild(empty);
    return;
  }

  const table = doc.createElement("table");
  table.className = "queue-table";
  const thead = doc.createElement("thead");
  const headRow = doc.createElement("tr");
  for (const column of COLUMNS) {
    const th = doc.createElement("th");
    th.textContent = column.label;
    if (column.key) {
      th.classList.add("sortable");
      if (state.sort?.key === column.key) {
        th.classList.add(state.sort.dir === 1 ? "asc" : "desc");
      }
      const key = column.key;
      th.addEventListener("click", () => handlers.onSort(key));
    }
    headRow.appendChild(th);
  }
  thead.appendChild(headRow);
  table.appendChild(thead);

  const ranks = new Map(page.rows.map((row, i) => [row.policy_id, i]));
  const offset = (page.page - 1) * page.page_size;
  const tbody = doc.createElement("tbody");
  for (const row of sortedRows(page, state.sort)) {
    const tr = doc.createElement("tr");
    tr.dataset.policy = row.policy_id;
    const rank = doc.createElement("td");
    rank.className = "rank";
    rank.textContent = String(offset + (ranks.get(row.policy_id) ?? 0) + 1);
    tr.appendChild(rank);

    const policy = doc.createElement("td");
    const link = doc.createElement("a");
    link.href = `#/policy/${row.policy_id}`;
    link.textContent = row.policy_id;
    link.addEventListener("click", (event) => {
      event.preventDefault();
      handlers.onOpenPolicy(row.policy_id);
    });
    policy.appendChild(link);
    tr.appendChild(policy);

    const score = doc.createElement("td");
    score.className = "score";
    score.textContent = row.score.toFixed(1);
    tr.appendChild(score);

    const x = doc.createElement("td");
    x.textContent = String(row.x);
    tr.appendChild(x);
    const y = doc.createElement("td");
    y.textContent = String(row.y);
    tr.appendChild(y);

    const review = doc.createElement("td");
    review.appendChild(reviewBadge(doc, row.last_review));
    tr.appendChild(review);
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  container.appendChild(table);

  const pages = Math.max(1, Math.ceil(page.total / page.page_size));
  const footer = doc.createElement("div");
  footer.className = "pager";
  const prev = doc.createElement("button");
  prev.textContent = "Prev";
  prev.disabled = page.page <= 1;
  prev.addEventListener("click", () => handlers.onPageChange(page.page - 1));
  const label = doc.createElement("span");
  label.textContent = `page ${page.page} of ${pages} (${page.total} policies)`;
  const next = doc.createElement("button");
  next.textContent = "Next";
  next.disabled = page.page >= pages;
  next.addEventListener("click", () => handlers.onPageChange(page.page + 1));
  footer.appendChild(prev);
  footer.appendChild(label);
  footer.appendChild(next);
  container.appendChild(footer);
}
