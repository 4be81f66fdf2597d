/** Stale-response discarding for overlapping async fetches. */

/**
 * Tags each request with a sequence number per topic; a response is applied
 * only if no newer request on the same topic has started since.
 */
export class SequenceGate {
  private readonly latest = new Map<string, number>();

  /** Run `work` and resolve its value, or null when it was superseded. */
  async run<T>(topic: string, work: () => Promise<T>): Promise<T | null> {
    const seq = (this.latest.get(topic) ?? 0) + 1;
    this.latest.set(topic, seq);
    const value = await work();
    return this.latest.get(topic) === seq ? value : null;
  }
}
