/** Rating-session loop: next-item -> display -> submit until the server
 * reports the phase done.
 *
 * The client never orders anything itself; each iteration asks the server
 * for the current item, so a reload (or a crashed tab) resumes exactly
 * where the server says.  Submissions are retried on transport failures —
 * the server treats identical re-submissions as idempotent, so a retry can
 * never double-count — while HTTP-level rejections (409 conflict, closed
 * phase, ...) surface immediately.
 */

import { ApiClient, ApiError, Phase, RatingOut, labelsFor } from "./api";

export interface SessionView {
  studyId: string;
  raterId: string;
  phase: Phase;
  caseId: string;
  assetRef: string;
  position: number;
  total: number;
  labels: readonly string[];
}

export interface SessionHooks {
  /** Show the case and resolve with the chosen label. */
  chooseLabel(view: SessionView): Promise<string> | string;
  onSubmitted?(record: RatingOut): void;
  /** Transport failure: attempt number (1-based) before the next retry. */
  onRetry?(error: unknown, attempt: number): void;
}

export interface SessionOptions {
  maxAttempts?: number;
  retryDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export interface SessionResult {
  submitted: number;
  total: number;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

async function submitWithRetry(
  api: ApiClient,
  view: SessionView,
  label: string,
  elapsedS: number,
  hooks: SessionHooks,
  opts: Required<Pick<SessionOptions, "maxAttempts" | "retryDelayMs">> & {
    sleep: (ms: number) => Promise<void>;
  },
): Promise<RatingOut> {
  for (let attempt = 1; ; attempt += 1) {
    try {
      return await api.submitRating(
        view.studyId,
        view.raterId,
        view.phase,
        view.caseId,
        label,
        elapsedS,
      );
    } catch (err) {
      // the server answered: its verdict is final (conflicts, closed phases)
      if (err instanceof ApiError) throw err;
      if (attempt >= opts.maxAttempts) throw err;
      hooks.onRetry?.(err, attempt);
      await opts.sleep(opts.retryDelayMs);
    }
  }
}

export async function runSession(
  api: ApiClient,
  studyId: string,
  raterId: string,
  phase: Phase,
  hooks: SessionHooks,
  options: SessionOptions = {},
): Promise<SessionResult> {
  const opts = {
    maxAttempts: options.maxAttempts ?? 5,
    retryDelayMs: options.retryDelayMs ?? 500,
    sleep: options.sleep ?? defaultSleep,
  };
  const { manifest } = await api.getStudy(studyId);
  const labels = labelsFor(manifest.space);

  let submitted = 0;
  let total = manifest.cases.length;
  for (;;) {
    const item = await api.nextItem(studyId, raterId, phase);
    total = item.total;
    if (item.done || item.case === undefined) {
      return { submitted, total };
    }
    const view: SessionView = {
      studyId,
      raterId,
      phase,
      caseId: item.case,
      assetRef: item.asset_ref ?? item.case,
      position: item.position ?? submitted + 1,
      total: item.total,
      labels,
    };
    const started = Date.now();
    const label = await hooks.chooseLabel(view);
    const record = await submitWithRetry(
      api,
      view,
      label,
      (Date.now() - started) / 1000,
      hooks,
      opts,
    );
    submitted += 1;
    hooks.onSubmitted?.(record);
  }
}
