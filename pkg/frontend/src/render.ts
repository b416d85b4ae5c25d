/** Render scheduling: at most one request in flight, a short debounce in
 * front, and a trailing re-render when edits arrive mid-flight. */

export type Timer = ReturnType<typeof setTimeout>;

export interface SchedulerOptions {
  debounceMs?: number;
  setTimeoutFn?: (fn: () => void, ms: number) => Timer;
  clearTimeoutFn?: (t: Timer) => void;
}

export class RenderScheduler {
  private inflight = false;
  private pendingEdit = false;
  private timer: Timer | null = null;
  private readonly debounceMs: number;
  private readonly setTimeoutFn: (fn: () => void, ms: number) => Timer;
  private readonly clearTimeoutFn: (t: Timer) => void;

  constructor(
    private readonly run: () => Promise<void>,
    options: SchedulerOptions = {},
  ) {
    this.debounceMs = options.debounceMs ?? 150;
    this.setTimeoutFn = options.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimeoutFn = options.clearTimeoutFn ?? ((t) => clearTimeout(t));
  }

  /** Call on every edit that should (eventually) refresh the render. */
  request(): void {
    if (this.inflight) {
      this.pendingEdit = true;
      return;
    }
    if (this.timer !== null) this.clearTimeoutFn(this.timer);
    this.timer = this.setTimeoutFn(() => {
      this.timer = null;
      this.launch();
    }, this.debounceMs);
  }

  private launch(): void {
    this.inflight = true;
    this.run()
      .catch(() => {
        // error handling belongs to the run callback; scheduling only cares
        // that the flight ended
      })
      .finally(() => {
        this.inflight = false;
        if (this.pendingEdit) {
          this.pendingEdit = false;
          this.request();
        }
      });
  }

  get busy(): boolean {
    return this.inflight;
  }
}
