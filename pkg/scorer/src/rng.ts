/**
 * Seeded random number generator for deterministic corpus generation.
 * Mulberry32: small, fast, and reproducible across platforms.
 */
export type Rng = () => number;

export function makeSeededRandom(seed: number): Rng {
  let s = seed >>> 0;
  return function random(): number {
    s += 0x6d2b79f5;
    let t = Math.imul(s ^ (s >>> 15), 1 | s);
    t ^= t + Math.imul(t ^ (t >>> 7), 61 | t);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Uniform integer in [lo, hi], inclusive. */
export function randInt(rng: Rng, lo: number, hi: number): number {
  return lo + Math.floor(rng() * (hi - lo + 1));
}
