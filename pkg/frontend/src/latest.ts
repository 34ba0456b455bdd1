/** One in-flight fetch per widget: a new run aborts the previous request
 * and stale responses are discarded, so the newest filter state always
 * wins regardless of network ordering. */

export class LatestFetch {
  private sequence = 0;
  private controller: AbortController | null = null;

  async run<T>(work: (signal: AbortSignal) => Promise<T>): Promise<T | undefined> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const ticket = ++this.sequence;
    try {
      const result = await work(controller.signal);
      return ticket === this.sequence ? result : undefined;
    } catch (error) {
      if (ticket !== this.sequence || controller.signal.aborted) {
        return undefined; // superseded; its failure is irrelevant
      }
      throw error;
    }
  }
}
