/**
 * Scorer backends answering the bridge protocol ops.
 *
 * Attention rows have vocabSize + 1 entries: slot k holds token id k + 1,
 * the last slot is the end symbol. CMLM rows have vocabSize entries.
 * Table rows pass through exactly as loaded (no arithmetic), so a decode
 * through this server is bit-identical to an in-process table scorer.
 */

export const MASK = -1;

export interface ScorerBackend {
  vocabSize: number;
  scoreNext(prefix: number[], frameLimit: number): number[];
  cmlmPredict(slots: number[]): number[][];
}

export function uniformRow(size: number): number[] {
  return new Array(size).fill(-Math.log(size));
}

/** Mass `sharpness` on one slot, the rest spread evenly. */
export function sharpRow(size: number, hot: number, sharpness: number): number[] {
  if (size === 1) return [0];
  const rest = (1 - sharpness) / (size - 1);
  const row = new Array(size).fill(Math.log(rest));
  row[hot] = Math.log(sharpness);
  return row;
}

export class UniformBackend implements ScorerBackend {
  private attRow: number[];
  private cmlmRow: number[];

  constructor(public vocabSize: number) {
    this.attRow = uniformRow(vocabSize + 1);
    this.cmlmRow = uniformRow(vocabSize);
  }

  scoreNext(): number[] {
    return this.attRow;
  }

  cmlmPredict(slots: number[]): number[][] {
    const masked = slots.filter((s) => s === MASK).length;
    return new Array(masked).fill(this.cmlmRow);
  }
}

interface AttEntry {
  logp: number[];
  visibleFrom?: number;
}

export interface TableDoc {
  vocab_size: number;
  att?: {
    default?: number[];
    entries?: { prefix: number[]; logp: number[]; visible_from?: number }[];
  };
  cmlm?: {
    default?: number[];
    entries?: { slots: number[]; logp: number[][] }[];
  };
}

export class TableBackend implements ScorerBackend {
  vocabSize: number;
  private att = new Map<string, AttEntry>();
  private attDefault: number[];
  private cmlm = new Map<string, number[][]>();
  private cmlmDefault: number[];

  constructor(doc: TableDoc) {
    this.vocabSize = doc.vocab_size;
    this.attDefault = doc.att?.default ?? uniformRow(this.vocabSize + 1);
    this.cmlmDefault = doc.cmlm?.default ?? uniformRow(this.vocabSize);
    for (const entry of doc.att?.entries ?? []) {
      this.att.set(entry.prefix.join(","), {
        logp: entry.logp,
        visibleFrom: entry.visible_from,
      });
    }
    for (const entry of doc.cmlm?.entries ?? []) {
      this.cmlm.set(entry.slots.join(","), entry.logp);
    }
  }

  addAtt(prefix: number[], logp: number[], visibleFrom?: number): void {
    const key = prefix.join(",");
    if (!this.att.has(key)) this.att.set(key, { logp, visibleFrom });
  }

  addCmlm(slots: number[], logp: number[][]): void {
    const key = slots.join(",");
    if (!this.cmlm.has(key)) this.cmlm.set(key, logp);
  }

  scoreNext(prefix: number[], frameLimit: number): number[] {
    const entry = this.att.get(prefix.join(","));
    if (!entry) return this.attDefault;
    if (entry.visibleFrom !== undefined && frameLimit < entry.visibleFrom) {
      return this.attDefault;
    }
    return entry.logp;
  }

  cmlmPredict(slots: number[]): number[][] {
    const masked = slots.filter((s) => s === MASK).length;
    const rows = this.cmlm.get(slots.join(","));
    if (rows) return rows;
    return new Array(masked).fill(this.cmlmDefault);
  }
}

/**
 * Oracle: a table built from the reference transcripts. Every reference
 * prefix predicts its true continuation (end symbol after the last token);
 * any masked slot resolves against the first reference whose observed
 * slots agree. First-written entries win on prefix collisions.
 */
export function oracleBackend(refs: number[][], vocabSize: number, sharpness = 0.98): ScorerBackend {
  const table = new TableBackend({ vocab_size: vocabSize });
  for (const ref of refs) {
    for (let l = 0; l <= ref.length; l++) {
      const hot = l === ref.length ? vocabSize : ref[l] - 1;
      table.addAtt(ref.slice(0, l), sharpRow(vocabSize + 1, hot, sharpness));
    }
  }
  const backend: ScorerBackend = {
    vocabSize,
    scoreNext: (prefix, frameLimit) => table.scoreNext(prefix, frameLimit),
    cmlmPredict: (slots) => {
      const match = refs.find(
        (ref) =>
          ref.length === slots.length &&
          slots.every((s, i) => s === MASK || s === ref[i])
      );
      const rows: number[][] = [];
      for (let i = 0; i < slots.length; i++) {
        if (slots[i] !== MASK) continue;
        rows.push(
          match
            ? sharpRow(vocabSize, match[i] - 1, sharpness)
            : uniformRow(vocabSize)
        );
      }
      return rows;
    },
  };
  return backend;
}

/**
 * Tiny trainable scorer: add-one-smoothed bigram counts fit on the
 * reference corpus. The autoregressive side conditions on the previous
 * token (0 = sentence start); the CMLM side combines left and right
 * neighbor bigrams, backing off to counts over everything when a neighbor
 * is masked or out of range. Deterministic given the corpus.
 */
export class TinyBackend implements ScorerBackend {
  vocabSize: number;
  /** next[ctx][k]: count of token id k+1 (or eos at index vocabSize) after ctx. */
  private next: number[][];
  private prev: number[][];

  constructor(refs: number[][], vocabSize: number) {
    this.vocabSize = vocabSize;
    this.next = Array.from({ length: vocabSize + 1 }, () =>
      new Array(vocabSize + 1).fill(0)
    );
    this.prev = Array.from({ length: vocabSize + 2 }, () =>
      new Array(vocabSize).fill(0)
    );
    for (const ref of refs) {
      for (let i = 0; i <= ref.length; i++) {
        const ctx = i === 0 ? 0 : ref[i - 1];
        const target = i === ref.length ? this.vocabSize : ref[i] - 1;
        this.next[ctx][target] += 1;
        if (i < ref.length) {
          const right = i + 1 < ref.length ? ref[i + 1] : this.vocabSize + 1;
          this.prev[right][ref[i] - 1] += 1;
        }
      }
    }
  }

  private normalizeCounts(counts: number[]): number[] {
    const total = counts.reduce((a, b) => a + b + 1, 0);
    return counts.map((c) => Math.log((c + 1) / total));
  }

  scoreNext(prefix: number[]): number[] {
    const ctx = prefix.length === 0 ? 0 : prefix[prefix.length - 1];
    const counts = this.next[ctx] ?? this.next[0];
    return this.normalizeCounts(counts);
  }

  cmlmPredict(slots: number[]): number[][] {
    const rows: number[][] = [];
    for (let i = 0; i < slots.length; i++) {
      if (slots[i] !== MASK) continue;
      const left = i > 0 && slots[i - 1] !== MASK ? slots[i - 1] : 0;
      const leftCounts = this.next[left].slice(0, this.vocabSize);
      const right =
        i + 1 < slots.length && slots[i + 1] !== MASK
          ? slots[i + 1]
          : this.vocabSize + 1;
      const rightCounts = this.prev[right] ?? new Array(this.vocabSize).fill(0);
      const combined = leftCounts.map((c, k) => c + rightCounts[k]);
      rows.push(this.normalizeCounts(combined));
    }
    return rows;
  }
}
