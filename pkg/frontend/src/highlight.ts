/** Split a document body into plain and highlighted segments from quote
 * character spans. Spans are clamped to the body, sorted, and merged when they
 * overlap so the segment list always tiles the body exactly once. */

export interface HighlightSpan {
  start: number;
  end: number;
}

export interface Segment {
  text: string;
  highlighted: boolean;
}

export function mergeSpans(spans: HighlightSpan[], bodyLength: number): HighlightSpan[] {
  const clamped = spans
    .map((s) => ({ start: Math.max(0, s.start), end: Math.min(bodyLength, s.end) }))
    .filter((s) => s.start < s.end)
    .sort((a, b) => a.start - b.start || a.end - b.end);
  const merged: HighlightSpan[] = [];
  for (const span of clamped) {
    const last = merged[merged.length - 1];
    if (last && span.start <= last.end) {
      last.end = Math.max(last.end, span.end);
    } else {
      merged.push({ ...span });
    }
  }
  return merged;
}

export function segmentBody(body: string, spans: HighlightSpan[]): Segment[] {
  const segments: Segment[] = [];
  let cursor = 0;
  for (const span of mergeSpans(spans, body.length)) {
    if (span.start > cursor) {
      segments.push({ text: body.slice(cursor, span.start), highlighted: false });
    }
    segments.push({ text: body.slice(span.start, span.end), highlighted: true });
    cursor = span.end;
  }
  if (cursor < body.length) {
    segments.push({ text: body.slice(cursor), highlighted: false });
  }
  return segments;
}
