// Maps answer spans (char offsets into norm_body) onto the display text via
// the document's offset map. The UI never re-searches answer text.

export interface DisplaySpan {
  readonly start: number;
  readonly end: number;
}

// offsetMap[i] is the display-text offset that normalized char i came from;
// every char of a replacement points at the start of its source region, so
// the end of a span is the next distinct mapped offset after its last char.
export function toDisplaySpan(
  offsetMap: readonly number[],
  displayLength: number,
  start: number,
  end: number,
): DisplaySpan {
  if (!(0 <= start && start < end && end <= offsetMap.length)) {
    throw new RangeError(`span (${start}, ${end}) out of range for offset map`);
  }
  const rawStart = offsetMap[start]!;
  const last = offsetMap[end - 1]!;
  let k = end;
  while (k < offsetMap.length && offsetMap[k]! <= last) {
    k += 1;
  }
  const rawEnd = k < offsetMap.length ? offsetMap[k]! : displayLength;
  return { start: rawStart, end: rawEnd };
}

export interface Segments {
  readonly before: string;
  readonly mark: string;
  readonly after: string;
}

export function splitForHighlight(text: string, span: DisplaySpan | null): Segments {
  if (span === null) {
    return { before: text, mark: "", after: "" };
  }
  if (!(0 <= span.start && span.start <= span.end && span.end <= text.length)) {
    throw new RangeError(`display span (${span.start}, ${span.end}) outside text`);
  }
  return {
    before: text.slice(0, span.start),
    mark: text.slice(span.start, span.end),
    after: text.slice(span.end),
  };
}
