/**
 * Synthetic corpus generator: plants a transcript per utterance as spike
 * runs separated by blanks (so forced alignment always exists), then
 * perturbs each frame with concentration-controlled noise. Deterministic
 * for a fixed seed; as spike_sharpness grows the rows approach one-hot and
 * greedy decoding recovers the planted transcripts exactly.
 */

import { z } from "zod";
import { Rng, makeSeededRandom, randInt } from "./rng";
import { formatEmissions, formatRefs, vocabTokens } from "./io";

export const corpusSpecSchema = z.object({
  num_utts: z.number().int().positive(),
  min_len: z.number().int().positive(),
  max_len: z.number().int().positive(),
  vocab_size: z.number().int().min(1).max(400),
  spike_sharpness: z.number().positive(),
  blank_bias: z.number().nonnegative().default(0),
  seed: z.number().int(),
});

export type CorpusSpec = z.infer<typeof corpusSpecSchema>;

export interface GeneratedCorpus {
  vocab: string; // vocab.txt content
  refs: string; // refs.tsv content
  utts: Map<string, string>; // utt id -> .ctcpost content
  references: Map<string, number[]>;
}

/**
 * Token process: a seeded first-order Markov chain over the vocabulary.
 * Cubing the raw weights skews the rows, so the corpus carries learnable
 * unigram and bigram statistics (row 0 is the sentence-start distribution).
 */
function makeTokenChain(rng: Rng, vocabSize: number): number[][] {
  const chain: number[][] = [];
  for (let prev = 0; prev <= vocabSize; prev++) {
    const weights: number[] = [];
    let total = 0;
    for (let k = 0; k < vocabSize; k++) {
      const w = 0.05 + Math.pow(rng(), 3);
      weights.push(w);
      total += w;
    }
    chain.push(weights.map((w) => w / total));
  }
  return chain;
}

function sampleToken(rng: Rng, probs: number[]): number {
  let u = rng();
  for (let k = 0; k < probs.length; k++) {
    u -= probs[k];
    if (u < 0) return k + 1;
  }
  return probs.length;
}

function plantLayout(rng: Rng, transcript: number[]): number[] {
  const frames: number[] = [];
  const blanks = () => {
    for (let i = randInt(rng, 1, 2); i > 0; i--) frames.push(0);
  };
  blanks();
  for (const token of transcript) {
    for (let i = randInt(rng, 1, 2); i > 0; i--) frames.push(token);
    blanks();
  }
  return frames;
}

function noisyRow(rng: Rng, target: number, numLabels: number, spec: CorpusSpec): number[] {
  const weights = new Array(numLabels);
  let total = 0;
  for (let k = 0; k < numLabels; k++) {
    let w = -Math.log(1 - rng()); // exponential noise
    if (k === target) w += spec.spike_sharpness;
    if (k === 0) w += spec.blank_bias;
    weights[k] = w;
    total += w;
  }
  return weights.map((w) => Math.log(w / total));
}

export function generateCorpus(spec: CorpusSpec): GeneratedCorpus {
  if (spec.min_len > spec.max_len) {
    throw new Error(`min_len ${spec.min_len} > max_len ${spec.max_len}`);
  }
  const rng = makeSeededRandom(spec.seed);
  const tokens = vocabTokens(spec.vocab_size);
  const numLabels = spec.vocab_size + 1;
  const chain = makeTokenChain(rng, spec.vocab_size);
  const references = new Map<string, number[]>();
  const utts = new Map<string, string>();
  for (let u = 0; u < spec.num_utts; u++) {
    const uttId = `utt-${String(u).padStart(4, "0")}`;
    const length = randInt(rng, spec.min_len, spec.max_len);
    const transcript: number[] = [];
    for (let i = 0; i < length; i++) {
      const prev = i === 0 ? 0 : transcript[i - 1];
      transcript.push(sampleToken(rng, chain[prev]));
    }
    const layout = plantLayout(rng, transcript);
    const rows = layout.map((target) => noisyRow(rng, target, numLabels, spec));
    references.set(uttId, transcript);
    utts.set(uttId, formatEmissions(rows));
  }
  return {
    vocab: tokens.join("\n") + "\n",
    refs: formatRefs(references, tokens),
    utts,
    references,
  };
}
