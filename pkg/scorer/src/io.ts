/** File formats shared with the decoder: CTCPOST lattices, vocab, refs. */

import * as fs from "fs";
import * as path from "path";

export function formatEmissions(rows: number[][]): string {
  const lines = [`CTCPOST 1 ${rows.length} ${rows[0].length}`];
  for (const row of rows) {
    lines.push(row.map((v) => (v === -Infinity ? "-inf" : String(v))).join(" "));
  }
  return lines.join("\n") + "\n";
}

export function formatRefs(refs: Map<string, number[]>, tokens: string[]): string {
  const lines: string[] = [];
  for (const [uttId, ids] of refs) {
    lines.push(`${uttId}\t${ids.map((i) => tokens[i]).join(" ")}`);
  }
  return lines.join("\n") + "\n";
}

export function parseRefs(text: string, tokens: string[]): Map<string, number[]> {
  const index = new Map(tokens.map((t, i) => [t, i]));
  const refs = new Map<string, number[]>();
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    const [uttId, body = ""] = line.split("\t");
    const ids = body
      .split(" ")
      .filter((t) => t.length > 0)
      .map((t) => {
        const id = index.get(t);
        if (id === undefined) throw new Error(`unknown token ${JSON.stringify(t)}`);
        return id;
      });
    refs.set(uttId, ids);
  }
  return refs;
}

export function vocabTokens(vocabSize: number): string[] {
  const letters = "abcdefghijklmnopqrstuvwxyz";
  const tokens = ["<blank>"];
  for (let i = 0; i < vocabSize; i++) {
    tokens.push(i < letters.length ? letters[i] : `t${i}`);
  }
  return tokens;
}

export function writeFileInDir(dir: string, name: string, content: string): void {
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(path.join(dir, name), content, "utf-8");
}
