/**
 * Edit-pause detection and the single-in-flight request rule.
 *
 * Debouncer fires once per pause: every change restarts the quiet
 * timer, so a burst of keystrokes costs one callback.  SingleFlight
 * aborts the previous request when a new one starts, so at most one
 * response can ever land.
 */

export const DEBOUNCE_MS = 400;

export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private readonly quietMs: number = DEBOUNCE_MS) {}

  schedule(fn: () => void): void {
    this.cancel();
    this.timer = setTimeout(() => {
      this.timer = null;
      fn();
    }, this.quietMs);
  }

  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  get pending(): boolean {
    return this.timer !== null;
  }
}

export class SingleFlight {
  private controller: AbortController | null = null;

  /** Run `task`, aborting whatever was in flight before it. */
  async run<T>(task: (signal: AbortSignal) => Promise<T>): Promise<T> {
    this.abort();
    const controller = new AbortController();
    this.controller = controller;
    try {
      return await task(controller.signal);
    } finally {
      if (this.controller === controller) {
        this.controller = null;
      }
    }
  }

  abort(): void {
    if (this.controller !== null) {
      this.controller.abort();
      this.controller = null;
    }
  }
}

/** True for the cancellation a SingleFlight abort causes. */
export function isAbort(err: unknown): boolean {
  return err instanceof DOMException && err.name === 'AbortError';
}
