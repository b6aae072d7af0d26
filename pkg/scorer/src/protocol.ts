/**
 * Line protocol: one JSON object per line, responses echo the request id.
 * Unknown ops and validation failures answer {"id":n,"error":"..."}.
 */

import { z } from "zod";
import { ScorerBackend } from "./scorers";

export const helloSchema = z.object({
  op: z.literal("hello"),
  id: z.number().int().optional(),
  vocab_size: z.number().int().positive(),
});

export const scoreNextSchema = z.object({
  op: z.literal("score_next"),
  id: z.number().int().optional(),
  prefix: z.array(z.number().int()),
  frame_limit: z.number().int().nonnegative(),
});

export const cmlmPredictSchema = z.object({
  op: z.literal("cmlm_predict"),
  id: z.number().int().optional(),
  slots: z.array(z.number().int()),
});

export const requestSchema = z.discriminatedUnion("op", [
  helloSchema,
  scoreNextSchema,
  cmlmPredictSchema,
]);

export const responseSchema = z
  .object({
    id: z.number().int().optional(),
    ok: z.literal(true).optional(),
    logp: z
      .union([z.array(z.number()), z.array(z.array(z.number()))])
      .optional(),
    error: z.string().optional(),
  })
  .refine((r) => r.ok !== undefined || r.logp !== undefined || r.error !== undefined, {
    message: "response carries ok, logp, or error",
  });

export type Response = z.infer<typeof responseSchema>;

export class ProtocolHandler {
  constructor(private backend: ScorerBackend) {}

  /** Handle one request line; always returns one response line. */
  handleLine(line: string): string {
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch (err) {
      return JSON.stringify({ error: `malformed JSON: ${err}` });
    }
    const id =
      typeof raw === "object" && raw !== null && typeof (raw as any).id === "number"
        ? ((raw as any).id as number)
        : undefined;
    const respond = (body: Omit<Response, "id">): string =>
      JSON.stringify(id !== undefined ? { id, ...body } : body);

    const parsed = requestSchema.safeParse(raw);
    if (!parsed.success) {
      const op = (raw as any)?.op;
      return respond({ error: `unknown or malformed op ${JSON.stringify(op)}` });
    }
    const request = parsed.data;
    switch (request.op) {
      case "hello":
        if (request.vocab_size !== this.backend.vocabSize) {
          return respond({
            error: `vocab_size ${request.vocab_size} != ${this.backend.vocabSize}`,
          });
        }
        return respond({ ok: true });
      case "score_next":
        return respond({
          logp: this.backend.scoreNext(request.prefix, request.frame_limit),
        });
      case "cmlm_predict":
        return respond({ logp: this.backend.cmlmPredict(request.slots) });
    }
  }
}
