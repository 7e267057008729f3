/**
 * Two-panel SVG figure builder for observer simulation output.
 *
 * Left panel: plant components v0, v1, v2 (plain lines) overlaid with the
 * observer estimates vhat0, vhat1, vhat2 (dashed lines) against time.
 * Right panel: log10 of the estimation error against time, with a dashed
 * vertical marker at every logged hybrid-mode switch.
 *
 * The builder consumes files only — trajectory CSV, log-error CSV, and the
 * run-summary JSON that records the switch times — so it runs with nothing
 * but Node present.
 */

import { readFileSync } from "fs";
import { dirname, join } from "path";

import {
  parseLogErrorCsv,
  parseTrajectoryCsv,
  type LogErrorRow,
  type TrajectoryRow,
} from "./csv.js";

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

/** Where to read the curves and markers from, and where to write the image. */
export interface FigureSpec {
  /** 14-column trajectory CSV. */
  trajectoryPath: string;
  /** 3-column log-error CSV. */
  logErrorPath: string;
  /** Output SVG path. */
  outputPath: string;
  /** Run-summary JSON holding the switch-time markers.  When omitted, a
   * file named figure_summary.json next to the trajectory CSV is used. */
  summaryPath?: string;
}

/** One hybrid-mode switch: time and direction ("z->v" or "v->z"). */
export interface SwitchEvent {
  t: number;
  direction: string;
}

/** Parsed run-summary JSON. */
export interface RunSummary {
  switches: SwitchEvent[];
  terminalError: number | null;
  maxTransientError: number | null;
  tEnd: number | null;
  dt: number | null;
  l: number | null;
  delta: number | null;
  aborted: string | null;
}

/** Everything the renderer needs, already parsed. */
export interface FigureInputs {
  trajectory: TrajectoryRow[];
  logError: LogErrorRow[];
  summary: RunSummary;
}

/** Resolve the summary path for a spec: explicit path if given, else the
 * conventional figure_summary.json sibling of the trajectory CSV. */
export function resolveSummaryPath(spec: FigureSpec): string {
  return spec.summaryPath ?? join(dirname(spec.trajectoryPath), "figure_summary.json");
}

function numberOrNull(value: unknown): number | null {
  return typeof value === "number" && Number.isFinite(value) ? value : null;
}

/**
 * Parse run-summary JSON text.  The switches list is load-bearing for the
 * figure, so its shape is validated; the scalar diagnostics are optional.
 */
export function parseSummary(text: string, path: string): RunSummary {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (e) {
    throw new Error(`${path}: not valid JSON (${(e as Error).message})`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new Error(`${path}: expected a JSON object`);
  }
  const obj = raw as Record<string, unknown>;
  if (!Array.isArray(obj.switches)) {
    throw new Error(`${path}: missing "switches" array`);
  }
  const switches: SwitchEvent[] = obj.switches.map((entry, i) => {
    if (typeof entry !== "object" || entry === null) {
      throw new Error(`${path}: switches[${i}] is not an object`);
    }
    const ev = entry as Record<string, unknown>;
    if (typeof ev.t !== "number" || !Number.isFinite(ev.t)) {
      throw new Error(`${path}: switches[${i}].t is not a finite number`);
    }
    if (typeof ev.direction !== "string") {
      throw new Error(`${path}: switches[${i}].direction is not a string`);
    }
    return { t: ev.t, direction: ev.direction };
  });
  return {
    switches,
    terminalError: numberOrNull(obj.terminal_error),
    maxTransientError: numberOrNull(obj.max_transient_error),
    tEnd: numberOrNull(obj.t_end),
    dt: numberOrNull(obj.dt),
    l: numberOrNull(obj.l),
    delta: numberOrNull(obj.delta),
    aborted: typeof obj.aborted === "string" ? obj.aborted : null,
  };
}

/** Read and parse all three input files of a spec. */
export function loadFigureInputs(spec: FigureSpec): FigureInputs {
  const read = (p: string): string => {
    try {
      return readFileSync(p, "utf8");
    } catch (e) {
      throw new Error(`cannot read ${p}: ${(e as Error).message}`);
    }
  };
  const summaryPath = resolveSummaryPath(spec);
  return {
    trajectory: parseTrajectoryCsv(read(spec.trajectoryPath), spec.trajectoryPath),
    logError: parseLogErrorCsv(read(spec.logErrorPath), spec.logErrorPath),
    summary: parseSummary(read(summaryPath), summaryPath),
  };
}

// ---------------------------------------------------------------------------
// Scales, ticks, paths
// ---------------------------------------------------------------------------

/** Affine map from a data domain onto a pixel range. */
export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
}

/** Build the affine scale mapping domain[0] -> range[0], domain[1] -> range[1]. */
export function makeLinearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  const slope = span === 0 ? 0 : (r1 - r0) / span;
  const scale = ((value: number): number => r0 + (value - d0) * slope) as Scale;
  scale.domain = [d0, d1];
  scale.range = [r0, r1];
  return scale;
}

/**
 * Round tick positions covering [lo, hi]: the step is the smallest value
 * from the 1-2-5 decade progression giving at most `target` intervals.
 */
export function niceTicks(lo: number, hi: number, target = 6): number[] {
  if (!(hi > lo) || !Number.isFinite(lo) || !Number.isFinite(hi)) {
    return [lo];
  }
  const rawStep = (hi - lo) / target;
  const magnitude = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = 10 * magnitude;
  for (const mult of [1, 2, 5]) {
    if (mult * magnitude >= rawStep) {
      step = mult * magnitude;
      break;
    }
  }
  const ticks: number[] = [];
  const first = Math.ceil(lo / step - 1e-9) * step;
  for (let v = first; v <= hi + step * 1e-9; v += step) {
    // snap to the step grid so floating accumulation cannot drift labels
    ticks.push(Number((Math.round(v / step) * step).toPrecision(12)));
  }
  return ticks;
}

/** Format a pixel coordinate with two decimals, trimming trailing zeros. */
export function fmtPx(value: number): string {
  return String(Number(value.toFixed(2)));
}

/**
 * Build an SVG path "d" string for a polyline through (xs[i], ys[i]) under
 * the given scales.  Non-finite y values break the line into segments.
 */
export function pathD(
  xs: readonly number[],
  ys: readonly number[],
  sx: Scale,
  sy: Scale,
): string {
  const parts: string[] = [];
  let penDown = false;
  for (let i = 0; i < xs.length; i++) {
    const y = ys[i]!;
    if (!Number.isFinite(y)) {
      penDown = false;
      continue;
    }
    const cmd = penDown ? "L" : "M";
    parts.push(`${cmd}${fmtPx(sx(xs[i]!))} ${fmtPx(sy(y))}`);
    penDown = true;
  }
  return parts.join("");
}

// ---------------------------------------------------------------------------
// Series extraction
// ---------------------------------------------------------------------------

/** Errors below this value plot as if they were exactly this value, so a
 * zero error cannot send the log curve to minus infinity. */
export const LOG_ERROR_FLOOR = 1e-16;
const LOG_FLOOR_EXPONENT = Math.log10(LOG_ERROR_FLOOR);

/** Log-error curve with the plotting floor applied. */
export function logErrorSeries(rows: readonly LogErrorRow[]): {
  t: number[];
  y: number[];
} {
  return {
    t: rows.map((r) => r.t),
    y: rows.map((r) => Math.max(r.log10Err, LOG_FLOOR_EXPONENT)),
  };
}

function extent(values: Iterable<number>): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) {
    return [0, 1];
  }
  return [lo, hi];
}

function padded([lo, hi]: [number, number], frac = 0.06): [number, number] {
  const span = hi - lo;
  if (span === 0) {
    return [lo - 1, hi + 1];
  }
  return [lo - frac * span, hi + frac * span];
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

/** Fixed figure geometry: overall size and the two plot boxes, in pixels.
 * x0/y0 is the top-left corner of a plot area, x1/y1 the bottom-right. */
export const LAYOUT = {
  width: 1200,
  height: 440,
  panels: {
    trajectory: { x0: 66, x1: 580, y0: 54, y1: 378 },
    logError: { x0: 668, x1: 1182, y0: 54, y1: 378 },
  },
} as const;

/** Plain/dashed line colours per component, shared by both styles. */
export const SERIES_COLORS = ["#1b6ca8", "#c8401f", "#2e8540"] as const;
const ERROR_COLOR = "#5e3c99";
const AXIS_COLOR = "#444444";
const GRID_COLOR = "#dddddd";
const MARKER_COLOR = "#777777";

/** The trajectory-panel x domain: always starts at 0 and reaches at least
 * the declared end time, so runs that aborted early keep the full axis. */
export function timeDomain(
  ts: readonly number[],
  tEnd: number | null,
): [number, number] {
  const [lo, hi] = extent(ts);
  return [Math.min(0, lo), Math.max(hi, tEnd ?? hi)];
}

// ---------------------------------------------------------------------------
// SVG assembly
// ---------------------------------------------------------------------------

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmtTick(value: number): string {
  return String(Number(value.toPrecision(12)));
}

interface Box {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

/** Axes, gridlines, and tick labels for one panel. */
function axes(box: Box, sx: Scale, sy: Scale): string {
  const parts: string[] = [];
  const xTicks = niceTicks(sx.domain[0], sx.domain[1]);
  const yTicks = niceTicks(sy.domain[0], sy.domain[1]);
  for (const tick of yTicks) {
    const y = fmtPx(sy(tick));
    parts.push(
      `<line x1="${box.x0}" y1="${y}" x2="${box.x1}" y2="${y}" stroke="${GRID_COLOR}" stroke-width="1"/>`,
      `<text x="${box.x0 - 8}" y="${y}" text-anchor="end" dominant-baseline="middle" class="tick">${esc(fmtTick(tick))}</text>`,
    );
  }
  for (const tick of xTicks) {
    const x = fmtPx(sx(tick));
    parts.push(
      `<line x1="${x}" y1="${box.y0}" x2="${x}" y2="${box.y1}" stroke="${GRID_COLOR}" stroke-width="1"/>`,
      `<text x="${x}" y="${box.y1 + 18}" text-anchor="middle" class="tick">${esc(fmtTick(tick))}</text>`,
    );
  }
  parts.push(
    `<rect x="${box.x0}" y="${box.y0}" width="${box.x1 - box.x0}" height="${box.y1 - box.y0}" fill="none" stroke="${AXIS_COLOR}" stroke-width="1"/>`,
  );
  return parts.join("\n");
}

function panelTitle(box: Box, text: string): string {
  const cx = (box.x0 + box.x1) / 2;
  return `<text x="${cx}" y="${box.y0 - 26}" text-anchor="middle" class="title">${esc(text)}</text>`;
}

function xAxisLabel(box: Box, text: string): string {
  const cx = (box.x0 + box.x1) / 2;
  return `<text x="${cx}" y="${box.y1 + 40}" text-anchor="middle" class="label">${esc(text)}</text>`;
}

function yAxisLabel(box: Box, text: string): string {
  const cy = (box.y0 + box.y1) / 2;
  const x = box.x0 - 46;
  return `<text x="${x}" y="${cy}" text-anchor="middle" class="label" transform="rotate(-90 ${x} ${cy})">${esc(text)}</text>`;
}

/** Colour/dash legend for the trajectory panel: one row per component. */
function trajectoryLegend(box: Box): string {
  const parts: string[] = [`<g id="legend">`];
  const x = box.x1 - 150;
  for (let i = 0; i < 3; i++) {
    const y = box.y0 + 14 + 18 * i;
    const color = SERIES_COLORS[i]!;
    parts.push(
      `<line x1="${x}" y1="${y}" x2="${x + 26}" y2="${y}" stroke="${color}" stroke-width="2"/>`,
      `<text x="${x + 31}" y="${y}" dominant-baseline="middle" class="tick">v${i}</text>`,
      `<line x1="${x + 64}" y1="${y}" x2="${x + 90}" y2="${y}" stroke="${color}" stroke-width="2" stroke-dasharray="6 4"/>`,
      `<text x="${x + 95}" y="${y}" dominant-baseline="middle" class="tick">v${i} est.</text>`,
    );
  }
  parts.push(`</g>`);
  return parts.join("\n");
}

/**
 * Render the full two-panel figure as a standalone SVG document string.
 */
export function renderFigure(inputs: FigureInputs): string {
  const { trajectory, logError, summary } = inputs;
  const boxA: Box = { ...LAYOUT.panels.trajectory };
  const boxB: Box = { ...LAYOUT.panels.logError };

  // Left panel scales: time on x, state components on y.
  const ts = trajectory.map((r) => r.t);
  const xDomA = timeDomain(ts, summary.tEnd);
  const sxA = makeLinearScale(xDomA, [boxA.x0, boxA.x1]);
  const stateValues: number[] = [];
  for (const row of trajectory) {
    stateValues.push(...row.v, ...row.vhat);
  }
  const syA = makeLinearScale(padded(extent(stateValues)), [boxA.y1, boxA.y0]);

  // Right panel scales: time on x, floored log-error on y.
  const series = logErrorSeries(logError);
  const xDomB = timeDomain(series.t, summary.tEnd);
  const sxB = makeLinearScale(xDomB, [boxB.x0, boxB.x1]);
  const syB = makeLinearScale(padded(extent(series.y)), [boxB.y1, boxB.y0]);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${LAYOUT.width}" height="${LAYOUT.height}" viewBox="0 0 ${LAYOUT.width} ${LAYOUT.height}">`,
    `<style>`,
    `text { font-family: Helvetica, Arial, sans-serif; fill: #222222; }`,
    `.title { font-size: 15px; font-weight: bold; }`,
    `.label { font-size: 13px; }`,
    `.tick { font-size: 11px; }`,
    `.note { font-size: 12px; fill: #b03030; }`,
    `</style>`,
    `<rect x="0" y="0" width="${LAYOUT.width}" height="${LAYOUT.height}" fill="#ffffff"/>`,
  );

  // --- left panel: component trajectories -------------------------------
  parts.push(`<g id="panel-trajectory">`);
  parts.push(axes(boxA, sxA, syA));
  parts.push(panelTitle(boxA, "state and estimate"));
  parts.push(xAxisLabel(boxA, "t"));
  parts.push(yAxisLabel(boxA, "component value"));
  for (let i = 0; i < 3; i++) {
    const vals = trajectory.map((r) => r.v[i]!);
    parts.push(
      `<path id="series-v${i}" class="series plant" d="${pathD(ts, vals, sxA, syA)}" fill="none" stroke="${SERIES_COLORS[i]}" stroke-width="1.6"/>`,
    );
  }
  for (let i = 0; i < 3; i++) {
    const vals = trajectory.map((r) => r.vhat[i]!);
    parts.push(
      `<path id="series-vhat${i}" class="series estimate" d="${pathD(ts, vals, sxA, syA)}" fill="none" stroke="${SERIES_COLORS[i]}" stroke-width="1.6" stroke-dasharray="6 4" opacity="0.9"/>`,
    );
  }
  parts.push(trajectoryLegend(boxA));
  parts.push(`</g>`);

  // --- right panel: log estimation error with switch markers ------------
  parts.push(`<g id="panel-logerr">`);
  parts.push(axes(boxB, sxB, syB));
  parts.push(panelTitle(boxB, "estimation error"));
  parts.push(xAxisLabel(boxB, "t"));
  parts.push(yAxisLabel(boxB, "log10 |estimate - state|"));
  for (const [i, ev] of summary.switches.entries()) {
    const x = fmtPx(sxB(ev.t));
    parts.push(
      `<line id="switch-marker-${i}" class="switch-marker" data-t="${ev.t}" data-direction="${esc(ev.direction)}" x1="${x}" y1="${boxB.y0}" x2="${x}" y2="${boxB.y1}" stroke="${MARKER_COLOR}" stroke-width="1.2" stroke-dasharray="4 4"/>`,
      `<text x="${x}" y="${boxB.y0 + 14}" text-anchor="middle" class="tick">${esc(ev.direction)}</text>`,
    );
  }
  parts.push(
    `<path id="logerr-curve" d="${pathD(series.t, series.y, sxB, syB)}" fill="none" stroke="${ERROR_COLOR}" stroke-width="1.6"/>`,
  );
  if (summary.aborted !== null) {
    parts.push(
      `<text x="${boxB.x0 + 8}" y="${boxB.y1 - 10}" class="note">aborted: ${esc(summary.aborted)}</text>`,
    );
  }
  parts.push(`</g>`);

  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}
