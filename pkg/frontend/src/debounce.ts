/**
 * Trailing-edge debouncer with a minimum spacing between executions.
 *
 * While the engineer drags a point the editor schedules a simulation on
 * every move; only the latest scheduled call may run, and runs are spaced
 * at least `intervalMs` apart (200 ms keeps the backend under 5 req/s).
 * An interval of 0 executes synchronously, which tests rely on.
 */
export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: (() => void) | null = null;
  private lastRun = -Infinity;

  constructor(private readonly intervalMs: number,
              private readonly now: () => number = () => Date.now()) {}

  schedule(fn: () => void): void {
    if (this.intervalMs <= 0) {
      this.pending = null;
      fn();
      return;
    }
    this.pending = fn;
    if (this.timer !== null) {
      return; // an earlier schedule already armed the timer; latest fn wins
    }
    const wait = Math.max(0, this.lastRun + this.intervalMs - this.now());
    this.timer = setTimeout(() => this.fire(), wait);
  }

  private fire(): void {
    this.timer = null;
    const fn = this.pending;
    this.pending = null;
    if (fn) {
      this.lastRun = this.now();
      fn();
    }
  }

  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
  }

  /** Run the pending call immediately, if any. */
  flush(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.fire();
    }
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }
}
