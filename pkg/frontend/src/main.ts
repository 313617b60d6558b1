import { ApiClient, ApiError } from "./api.js";
import { renderDetail, type DetailViewState } from "./detail.js";
import { renderQueue, type QueueViewState, type SortKey } from "./queue.js";
import { showToast } from "./toast.js";
import type { Review } from "./types.js";

// Controller: hash routing between the queue and a policy drill-down,
// optimistic review submission with rollback, stale-snapshot detection.

type Route = { view: "queue" } | { view: "policy"; policyId: string };

export interface AppOptions {
  root: HTMLElement;
  api?: ApiClient;
  reviewer?: string;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.message} (${err.code})`;
  return String(err);
}

export class App {
  readonly api: ApiClient;
  readonly root: HTMLElement;
  reviewer: string;
  route: Route = { view: "queue" };
  date: string | null = null; // snapshot the queue view is pinned to
  queue: QueueViewState = {
    page: null,
    error: null,
    sort: null,
    unreviewedOnly: false,
    loading: true,
  };
  pageNum = 1;
  detail: Omit<DetailViewState, "reviewer"> = {
    policy: null,
    error: null,
    selectedTrip: null,
    reviewPending: false,
    staleSnapshot: null,
    loading: false,
  };
  private inFlight = new Set<string>();

  constructor(options: AppOptions) {
    this.root = options.root;
    this.api = options.api ?? new ApiClient();
    this.reviewer = options.reviewer ?? "underwriter";
  }

  private get doc(): Document {
    return this.root.ownerDocument;
  }

  start(): void {
    const win = this.doc.defaultView;
    win?.addEventListener("hashchange", () => this.routeFromHash());
    this.routeFromHash();
  }

  routeFromHash(): void {
    const hash = this.doc.defaultView?.location.hash ?? "";
    const match = /^#\/policy\/(.+)$/.exec(hash);
    if (match) {
      void this.openPolicy(decodeURIComponent(match[1]));
    } else {
      void this.showQueue();
    }
  }

  async showQueue(): Promise<void> {
    this.route = { view: "queue" };
    await this.loadQueue();
  }

  async loadQueue(): Promise<void> {
    this.queue.loading = true;
    this.queue.error = null;
    this.render();
    try {
      const index = await this.api.rankings();
      if (!this.date || !index.dates.includes(this.date)) {
        this.date = index.latest;
      }
      this.queue.page = await this.api.queue(this.date, {
        page: this.pageNum,
        unreviewedOnly: this.queue.unreviewedOnly,
      });
    } catch (err) {
      this.queue.page = null;
      this.queue.error = describe(err);
    } finally {
      this.queue.loading = false;
      this.render();
    }
  }

  async openPolicy(policyId: string): Promise<void> {
    this.route = { view: "policy", policyId };
    this.detail = {
      policy: null,
      error: null,
      selectedTrip: null,
      reviewPending: this.inFlight.has(policyId),
      staleSnapshot: null,
      loading: true,
    };
    this.render();
    try {
      const [policy, index] = await Promise.all([
        this.api.policy(policyId, this.date ?? undefined),
        this.api.rankings(),
      ]);
      this.detail.policy = policy;
      if (index.latest !== policy.snapshot_date) {
        this.detail.staleSnapshot = index.latest;
      }
      const flagged = policy.trips.find((t) => t.label === 1);
      const first = flagged ?? policy.trips[0];
      if (first) await this.selectTrip(first.trip_id);
    } catch (err) {
      this.detail.error = describe(err);
    } finally {
      this.detail.loading = false;
      this.render();
    }
  }

  async selectTrip(tripId: string): Promise<void> {
    const policy = this.detail.policy;
    if (!policy) return;
    try {
      this.detail.selectedTrip = await this.api.trip(
        policy.policy.policy_id,
        tripId,
      );
    } catch (err) {
      showToast(this.doc, describe(err));
    }
    this.render();
  }

  async review(verdict: "CONFIRMED_DELIVERY" | "NOT_DELIVERY"): Promise<void> {
    const policy = this.detail.policy?.policy;
    if (!policy) return;
    const policyId = policy.policy_id;
    if (this.inFlight.has(policyId)) {
      showToast(this.doc, `review for ${policyId} already pending`);
      return;
    }
    const previous = policy.last_review;
    const optimistic: Review = {
      policy_id: policyId,
      verdict,
      reviewer: this.reviewer,
      timestamp: Date.now() / 1000,
    };
    policy.last_review = optimistic;
    this.detail.reviewPending = true;
    this.inFlight.add(policyId);
    this.render();
    try {
      const ack = await this.api.review(policyId, {
        verdict,
        reviewer: this.reviewer,
      });
      policy.last_review = ack.review;
      const row = this.queue.page?.rows.find(
        (r) => r.policy_id === policyId,
      );
      if (row) row.last_review = ack.review;
    } catch (err) {
      policy.last_review = previous; // roll the optimistic update back
      showToast(this.doc, describe(err));
    } finally {
      this.inFlight.delete(policyId);
      this.detail.reviewPending = false;
      this.render();
    }
  }

  navigate(route: Route): void {
    const win = this.doc.defaultView;
    if (win) {
      win.location.hash =
        route.view === "policy" ? `#/policy/${route.policyId}` : "#/";
      // hashchange listeners take it from here in the browser; in a
      // detached document, fall through and route directly
      if (win.location.hash !== "") return;
    }
    if (route.view === "policy") {
      void this.openPolicy(route.policyId);
    } else {
      void this.showQueue();
    }
  }

  render(): void {
    if (this.route.view === "queue") {
      renderQueue(this.root, this.queue, {
        onOpenPolicy: (policyId) =>
          this.navigate({ view: "policy", policyId }),
        onPageChange: (page) => {
          this.pageNum = page;
          void this.loadQueue();
        },
        onToggleUnreviewed: (on) => {
          this.queue.unreviewedOnly = on;
          this.pageNum = 1;
          void this.loadQueue();
        },
        onSort: (key) => this.cycleSort(key),
        onRetry: () => void this.loadQueue(),
      });
    } else {
      renderDetail(this.root, { ...this.detail, reviewer: this.reviewer }, {
        onBack: () => this.navigate({ view: "queue" }),
        onSelectTrip: (tripId) => void this.selectTrip(tripId),
        onReview: (verdict) => void this.review(verdict),
        onReload: () => {
          this.date = null;
          const route = this.route;
          if (route.view === "policy") void this.openPolicy(route.policyId);
        },
        onReviewerChange: (name) => {
          this.reviewer = name.trim() || this.reviewer;
        },
      });
    }
  }

  private cycleSort(key: SortKey): void {
    const current = this.queue.sort;
    if (!current || current.key !== key) {
      this.queue.sort = { key, dir: 1 };
    } else if (current.dir === 1) {
      this.queue.sort = { key, dir: -1 };
    } else {
      this.queue.sort = null; // back to server order
    }
    this.render();
  }
}

export function createApp(options: AppOptions): App {
  return new App(options);
}

// browser bootstrap; absent in tests, which construct App directly
const bootRoot =
  typeof document !== "undefined" ? document.getElementById("app") : null;
if (bootRoot) {
  createApp({ root: bootRoot }).start();
}
