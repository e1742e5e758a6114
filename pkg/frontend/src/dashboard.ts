/** Coordinator dashboard: turns a study report into a view model and
 * renders it as HTML — per-rater trainer calibration, test–retest
 * reliability, group-pooled cells, and overall inter-rater agreement,
 * each with its confidence interval and qualitative label.
 */

import { Comparison, KappaCell, Phase, StudyReport } from "./api";

export interface SpaceView {
  space: string;
  labels: string[];
  raters: string[];
  groups: string[];
  trainerCalibration: Record<string, Record<Phase, KappaCell>>;
  intraRater: Record<string, KappaCell>;
  groupIntra: { perGroup: Record<string, KappaCell>; comparison: Comparison | null };
  interRater: Record<
    Phase,
    { perGroup: Record<string, KappaCell>; overall: KappaCell; comparison: Comparison | null }
  >;
}

export interface DashboardModel {
  study: string;
  complete: boolean;
  incomplete?: string;
  /** raters (and the trainer) with at least one unfinished phase */
  incompleteRaters: string[];
  progress: Array<{ rater: string; phase: string; state: string }>;
  spaces: SpaceView[];
}

export function buildDashboard(report: StudyReport): DashboardModel {
  const status = report.status;
  const incompleteRaters: string[] = [];
  const progress: DashboardModel["progress"] = [];
  for (const [rater, phases] of Object.entries(status.phases)) {
    let unfinished = false;
    for (const [phase, state] of Object.entries(phases)) {
      progress.push({ rater, phase, state });
      if (state !== "COMPLETE") unfinished = true;
    }
    if (unfinished) incompleteRaters.push(rater);
  }
  if (status.trainer !== "COMPLETE") incompleteRaters.unshift(report.trainer);

  const spaces: SpaceView[] = [];
  if (report.tables) {
    for (const [space, sp] of Object.entries(report.tables.spaces)) {
      spaces.push({
        space,
        labels: sp.labels,
        raters: sp.raters,
        groups: sp.groups,
        trainerCalibration: sp.trainer_calibration,
        intraRater: sp.intra_rater,
        groupIntra: {
          perGroup: sp.group_intra.per_group,
          comparison: sp.group_intra.comparison,
        },
        interRater: {
          T0: {
            perGroup: sp.inter_rater.T0.per_group,
            overall: sp.inter_rater.T0.overall,
            comparison: sp.inter_rater.T0.comparison,
          },
          T1: {
            perGroup: sp.inter_rater.T1.per_group,
            overall: sp.inter_rater.T1.overall,
            comparison: sp.inter_rater.T1.comparison,
          },
        },
      });
    }
  }

  const model: DashboardModel = {
    study: report.study,
    complete: status.complete,
    incompleteRaters,
    progress,
    spaces,
  };
  if (report.incomplete !== undefined) model.incomplete = report.incomplete;
  return model;
}

/** "0.72 [0.68, 0.75] (substantial)"; a zero-width interval collapses to
 * just the point estimate, so perfect agreement reads "1.00 (perfect)". */
export function formatCell(cell: KappaCell | null | undefined): string {
  if (!cell) return "n/a";
  if (cell.degenerate) return "degenerate";
  if (cell.skipped) return `skipped (${cell.note ?? "not computable"})`;
  if (cell.kappa === undefined) return "n/a";
  const point = cell.kappa.toFixed(2);
  const interval =
    cell.ci_low !== undefined &&
    cell.ci_high !== undefined &&
    cell.ci_high - cell.ci_low > 5e-3
      ? ` [${cell.ci_low.toFixed(2)}, ${cell.ci_high.toFixed(2)}]`
      : "";
  const label = cell.agreement_label ? ` (${cell.agreement_label})` : "";
  return `${point}${interval}${label}`;
}

export function formatComparison(cmp: Comparison | null | undefined): string {
  if (!cmp) return "z-test: n/a (need exactly two groups)";
  if (cmp.skipped) return `z-test: skipped (${cmp.note ?? "not computable"})`;
  const [a, b] = cmp.groups ?? ["?", "?"];
  return `z-test ${a} vs ${b}: z = ${cmp.z?.toFixed(3)}, p = ${cmp.p_value?.toFixed(4)}`;
}

function esc(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function row(name: string, value: string): string {
  return `<tr><td>${esc(name)}</td><td>${esc(value)}</td></tr>`;
}

function table(title: string, rows: string[], footer?: string): string {
  const foot = footer ? `<p class="footnote">${esc(footer)}</p>` : "";
  return `<section class="block"><h3>${esc(title)}</h3><table><tbody>${rows.join(
    "",
  )}</tbody></table>${foot}</section>`;
}

function renderSpace(sp: SpaceView): string {
  const blocks: string[] = [];

  blocks.push(
    table(
      "Trainer calibration (vs reference labels)",
      sp.raters.flatMap((r) => {
        const cells = sp.trainerCalibration[r];
        return [
          row(`${r} T0`, formatCell(cells?.T0)),
          row(`${r} T1`, formatCell(cells?.T1)),
        ];
      }),
    ),
  );

  blocks.push(
    table(
      "Intra-rater reliability (T0 vs T1)",
      sp.raters.map((r) => row(r, formatCell(sp.intraRater[r]))),
    ),
  );

  blocks.push(
    table(
      "Group-pooled intra-rater agreement",
      sp.groups.map((g) => row(g, formatCell(sp.groupIntra.perGroup[g]))),
      formatComparison(sp.groupIntra.comparison),
    ),
  );

  for (const phase of ["T0", "T1"] as const) {
    const block = sp.interRater[phase];
    blocks.push(
      table(
        `Inter-rater agreement, ${phase} (Fleiss)`,
        [
          ...sp.groups.map((g) => row(g, formatCell(block?.perGroup[g]))),
          row("overall", formatCell(block?.overall)),
        ],
        formatComparison(block?.comparison),
      ),
    );
  }

  return `<section class="space"><h2>${esc(sp.space)} (${sp.labels
    .map(esc)
    .join(" / ")})</h2>${blocks.join("")}</section>`;
}

export function renderDashboard(model: DashboardModel): string {
  const parts: string[] = [`<h1>Study ${esc(model.study)}</h1>`];

  parts.push(
    table(
      "Progress",
      model.progress.map((p) => row(`${p.rater} ${p.phase}`, p.state)),
    ),
  );
  if (!model.complete) {
    const waiting = model.incompleteRaters.map(esc).join(", ") || "none";
    parts.push(
      `<p class="status incomplete">Study incomplete — waiting on: ${waiting}.` +
        ` Agreement tables appear when every phase is complete.</p>`,
    );
  }
  if (model.spaces.length === 0) {
    parts.push(`<p class="empty">No agreement tables yet — no complete rating set.</p>`);
  } else {
    parts.push(...model.spaces.map(renderSpace));
  }
  return parts.join("\n");
}

export function renderErrorState(message: string): string {
  return `<p class="error">Could not load the report: ${esc(message)}. Check the server and retry.</p>`;
}
