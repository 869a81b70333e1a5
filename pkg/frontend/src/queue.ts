/** Single in-flight request policy: edits are posted one at a time and
 * further interactions queue client-side, matching the service's per-session
 * serialization. */

export class EditQueue {
  private pending: Array<() => Promise<void>> = [];
  private running = false;

  get inFlight(): boolean {
    return this.running;
  }

  get depth(): number {
    return this.pending.length;
  }

  /** Enqueue an async action; resolves when that action settles. */
  submit(action: () => Promise<void>): Promise<void> {
    return new Promise((resolve, reject) => {
      this.pending.push(() => action().then(resolve, reject));
      void this.drain();
    });
  }

  private async drain(): Promise<void> {
    if (this.running) {
      return;
    }
    this.running = true;
    try {
      while (this.pending.length > 0) {
        const next = this.pending.shift()!;
        try {
          await next();
        } catch {
          // errors are delivered through the submitter's promise
        }
      }
    } finally {
      this.running = false;
    }
  }
}
