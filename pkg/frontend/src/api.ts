/** Typed client for the canine-lab study HTTP API.
 *
 * Every method maps 1:1 onto a server route; non-2xx responses become
 * ApiError with the server's `detail` message, so callers can branch on
 * `status` (409 = conflict / phase closed, 404 = unknown, 400 = bad input).
 */

export type Space = "FIVE" | "FOUR" | "THREE";
export type Phase = "T0" | "T1";
export type PhaseState = "NOT_STARTED" | "IN_PROGRESS" | "COMPLETE";

export const SPACE_LABELS: Record<Space, readonly string[]> = {
  FIVE: ["S1", "S2", "S3", "S4", "S5"],
  FOUR: ["I", "II", "III", "IV"],
  THREE: ["A", "B", "C"],
};

/** The single selectable label set for a study's classification system. */
export function labelsFor(space: string): readonly string[] {
  const labels = SPACE_LABELS[space as Space];
  if (!labels) throw new Error(`unknown label space: ${space}`);
  return labels;
}

export interface Manifest {
  id: string;
  space: Space;
  cases: string[];
  raters: Record<string, string>;
  trainer: string;
  seed: number;
  created_at: string;
  orderings: Record<string, Record<Phase, string[]>>;
  assets: Record<string, string>;
}

export interface StudyStatus {
  trainer: PhaseState;
  phases: Record<string, Record<Phase, PhaseState>>;
  orderings_differ: Record<string, boolean>;
  ordering_note?: string;
  complete: boolean;
}

export interface StudyEnvelope {
  manifest: Manifest;
  status: StudyStatus;
}

export interface NextItem {
  done?: boolean;
  case?: string;
  asset_ref?: string;
  position?: number;
  total: number;
}

export interface RatingOut {
  study: string;
  rater: string;
  phase: string;
  case: string;
  label: string;
  ts?: string;
}

/** One kappa table cell: an estimate, or a degenerate/skipped marker. */
export interface KappaCell {
  kappa?: number;
  se?: number;
  ci_low?: number;
  ci_high?: number;
  n_items?: number;
  agreement_label?: string;
  method?: string;
  ci_method?: string;
  degenerate?: boolean;
  skipped?: boolean;
  note?: string;
}

export interface Comparison {
  groups?: string[];
  z?: number;
  p_value?: number;
  skipped?: boolean;
  note?: string;
}

export interface SpaceTables {
  label_space: string;
  labels: string[];
  n_cases: number;
  trainer: string;
  raters: string[];
  groups: string[];
  trainer_calibration: Record<string, Record<Phase, KappaCell>>;
  intra_rater: Record<string, KappaCell>;
  group_intra: {
    per_group: Record<string, KappaCell>;
    comparison: Comparison | null;
  };
  inter_rater: Record<
    Phase,
    {
      per_group: Record<string, KappaCell>;
      overall: KappaCell;
      comparison: Comparison | null;
    }
  >;
}

export interface StudyTables {
  studies: string[];
  spaces: Record<string, SpaceTables>;
}

export interface StudyReport {
  study: string;
  space: string;
  n_cases: number;
  trainer: string;
  raters: Record<string, string>;
  status: StudyStatus;
  tables: StudyTables | null;
  text: string | null;
  incomplete?: string;
}

export interface CreateStudyBody {
  study_id: string;
  cases: string[];
  raters: Record<string, string>;
  space?: Space;
  seed?: number;
  trainer_id?: string;
  trainer_labels?: Record<string, string>;
  assets?: Record<string, string>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchFn(this.base + path, init);
    if (!res.ok) {
      let detail = res.statusText || `status ${res.status}`;
      try {
        const doc: unknown = await res.json();
        if (doc && typeof doc === "object" && "detail" in doc) {
          const d = (doc as { detail: unknown }).detail;
          detail = typeof d === "string" ? d : JSON.stringify(d);
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  listStudies(): Promise<{ studies: string[] }> {
    return this.request("GET", "/studies");
  }

  createStudy(body: CreateStudyBody): Promise<StudyEnvelope> {
    return this.request("POST", "/studies", body);
  }

  getStudy(studyId: string): Promise<StudyEnvelope> {
    return this.request("GET", `/studies/${encodeURIComponent(studyId)}`);
  }

  nextItem(studyId: string, raterId: string, phase: Phase): Promise<NextItem> {
    return this.request(
      "GET",
      `/studies/${encodeURIComponent(studyId)}/raters/${encodeURIComponent(raterId)}` +
        `/phases/${encodeURIComponent(phase)}/next`,
    );
  }

  submitRating(
    studyId: string,
    raterId: string,
    phase: Phase,
    caseId: string,
    label: string,
    elapsedS?: number,
  ): Promise<RatingOut> {
    const body: { case: string; label: string; elapsed_s?: number } = {
      case: caseId,
      label,
    };
    if (elapsedS !== undefined) body.elapsed_s = elapsedS;
    return this.request(
      "POST",
      `/studies/${encodeURIComponent(studyId)}/raters/${encodeURIComponent(raterId)}` +
        `/phases/${encodeURIComponent(phase)}/ratings`,
      body,
    );
  }

  report(studyId: string, bootstrapB?: number): Promise<StudyReport> {
    const query = bootstrapB === undefined ? "" : `?b=${bootstrapB}`;
    return this.request("GET", `/studies/${encodeURIComponent(studyId)}/report${query}`);
  }
}
