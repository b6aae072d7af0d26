#!/usr/bin/env node
/**
 * scorerd: bridge-protocol scorer endpoint and synthetic corpus generator.
 *
 *   scorerd serve --mode {oracle|uniform|table|tiny} [--table F]
 *                 [--refs F --vocab F] [--vocab-size N] [--sharpness P]
 *   scorerd gen   --spec spec.json --out DIR
 */

import * as fs from "fs";
import * as path from "path";
import * as readline from "readline";
import { parseArgs } from "util";

import { corpusSpecSchema, generateCorpus } from "./gen";
import { parseRefs, writeFileInDir } from "./io";
import { ProtocolHandler } from "./protocol";
import {
  ScorerBackend,
  TableBackend,
  TinyBackend,
  UniformBackend,
  oracleBackend,
} from "./scorers";

function fail(message: string): never {
  process.stderr.write(`error: ${message}\n`);
  process.exit(1);
}

function loadRefs(refsPath: string, vocabPath: string): { refs: number[][]; vocabSize: number } {
  const tokens = fs
    .readFileSync(vocabPath, "utf-8")
    .split("\n")
    .filter((l) => l.length > 0);
  if (tokens[0] !== "<blank>") fail(`vocab ${vocabPath} must start with <blank>`);
  const eos = tokens[tokens.length - 1] === "<eos>" ? 1 : 0;
  const refs = parseRefs(fs.readFileSync(refsPath, "utf-8"), tokens);
  return { refs: [...refs.values()], vocabSize: tokens.length - 1 - eos };
}

function buildBackend(values: Record<string, string | undefined>): ScorerBackend {
  const mode = values.mode ?? "uniform";
  switch (mode) {
    case "uniform": {
      if (!values["vocab-size"]) fail("uniform mode needs --vocab-size");
      return new UniformBackend(Number(values["vocab-size"]));
    }
    case "table": {
      if (!values.table) fail("table mode needs --table FILE");
      return new TableBackend(JSON.parse(fs.readFileSync(values.table, "utf-8")));
    }
    case "oracle": {
      if (!values.refs || !values.vocab) fail("oracle mode needs --refs and --vocab");
      const { refs, vocabSize } = loadRefs(values.refs, values.vocab);
      const sharpness = values.sharpness ? Number(values.sharpness) : 0.98;
      return oracleBackend(refs, vocabSize, sharpness);
    }
    case "tiny": {
      if (!values.refs || !values.vocab) fail("tiny mode needs --refs and --vocab");
      const { refs, vocabSize } = loadRefs(values.refs, values.vocab);
      return new TinyBackend(refs, vocabSize);
    }
    default:
      return fail(`unknown mode ${JSON.stringify(mode)}`);
  }
}

function serve(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      mode: { type: "string" },
      table: { type: "string" },
      refs: { type: "string" },
      vocab: { type: "string" },
      "vocab-size": { type: "string" },
      sharpness: { type: "string" },
    },
  });
  const handler = new ProtocolHandler(buildBackend(values));
  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  rl.on("line", (line) => {
    if (!line.trim()) return;
    process.stdout.write(handler.handleLine(line) + "\n");
  });
}

function gen(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      spec: { type: "string" },
      out: { type: "string" },
    },
  });
  if (!values.spec || !values.out) fail("gen needs --spec FILE and --out DIR");
  const spec = corpusSpecSchema.parse(JSON.parse(fs.readFileSync(values.spec, "utf-8")));
  const corpus = generateCorpus(spec);
  writeFileInDir(values.out, "vocab.txt", corpus.vocab);
  writeFileInDir(values.out, "refs.tsv", corpus.refs);
  for (const [uttId, content] of corpus.utts) {
    writeFileInDir(values.out, `${uttId}.ctcpost`, content);
  }
  process.stdout.write(
    `wrote ${corpus.utts.size} lattices to ${path.resolve(values.out)}\n`
  );
}

function main(): void {
  const [, , command, ...argv] = process.argv;
  if (command === "serve") return serve(argv);
  if (command === "gen") return gen(argv);
  fail(`usage: scorerd {serve|gen} ...  (got ${JSON.stringify(command ?? "")})`);
}

main();
