/**
 * Parsers for the two CSV contracts emitted by the simulation CLI.
 *
 * Trajectory files carry 14 columns:
 *   t,v0,v1,v2,y,vhat0,vhat1,vhat2,zhat0,zhat1,zhat2,zhat3,mode,err
 * Blank cells stand for fields without a value (the embedded coordinates
 * zhat* while the observer free-runs).  Log-error files carry 3 columns:
 *   t,err,log10_err
 *
 * Every failure is reported as an Error naming the offending column and,
 * where applicable, the 1-based line number, so a malformed file points
 * straight at its defect.
 */

/** One trajectory sample: plant state, output, and observer state. */
export interface TrajectoryRow {
  t: number;
  /** Plant state (v0, v1, v2). */
  v: [number, number, number];
  /** Measured output y = v0. */
  y: number;
  /** Observer estimate (vhat0, vhat1, vhat2). */
  vhat: [number, number, number];
  /** Embedded coordinates; NaN entries while the observer free-runs. */
  zhat: [number, number, number, number];
  /** Hybrid mode flag: "z" (corrected) or "v" (free-running copy). */
  mode: string;
  /** Estimation error |vhat - v|. */
  err: number;
}

/** One log-error sample. */
export interface LogErrorRow {
  t: number;
  err: number;
  log10Err: number;
}

export const TRAJECTORY_COLUMNS = [
  "t",
  "v0",
  "v1",
  "v2",
  "y",
  "vhat0",
  "vhat1",
  "vhat2",
  "zhat0",
  "zhat1",
  "zhat2",
  "zhat3",
  "mode",
  "err",
] as const;

export const LOG_ERROR_COLUMNS = ["t", "err", "log10_err"] as const;

/** Split CSV text into trimmed lines of cells.  The files in this contract
 * are plain comma-separated numerics with no quoting. */
function splitCsv(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.length > 0)
    .map((line) => line.split(","));
}

/** Locate each required column in the header, or fail naming the first
 * column that is absent. */
function columnIndices(
  header: string[],
  required: readonly string[],
  path: string,
): Map<string, number> {
  const indices = new Map<string, number>();
  header.forEach((name, i) => indices.set(name.trim(), i));
  for (const name of required) {
    if (!indices.has(name)) {
      throw new Error(`${path}: missing column "${name}"`);
    }
  }
  return indices;
}

/** Read a cell that must hold a finite number. */
function requiredNumber(
  cells: string[],
  col: number,
  name: string,
  line: number,
  path: string,
): number {
  const raw = (cells[col] ?? "").trim();
  if (raw === "") {
    throw new Error(`${path}:${line}: empty value in column "${name}"`);
  }
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    throw new Error(
      `${path}:${line}: unreadable value "${raw}" in column "${name}"`,
    );
  }
  return value;
}

/** Read a cell that may be blank (blank encodes NaN). */
function optionalNumber(
  cells: string[],
  col: number,
  name: string,
  line: number,
  path: string,
): number {
  const raw = (cells[col] ?? "").trim();
  if (raw === "") {
    return NaN;
  }
  const value = Number(raw);
  if (Number.isNaN(value)) {
    throw new Error(
      `${path}:${line}: unreadable value "${raw}" in column "${name}"`,
    );
  }
  return value;
}

/**
 * Parse trajectory CSV text into typed rows.
 *
 * Throws an Error naming the column for a missing header entry, an empty
 * required cell, or an unparseable cell; throws on ragged rows.
 */
export function parseTrajectoryCsv(
  text: string,
  path: string,
): TrajectoryRow[] {
  const lines = splitCsv(text);
  if (lines.length === 0) {
    throw new Error(`${path}: empty file`);
  }
  const header = lines[0]!;
  const idx = columnIndices(header, TRAJECTORY_COLUMNS, path);
  const col = (name: string): number => idx.get(name)!;

  const rows: TrajectoryRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i]!;
    const lineNo = i + 1;
    if (cells.length !== header.length) {
      throw new Error(
        `${path}:${lineNo}: expected ${header.length} cells, found ${cells.length}`,
      );
    }
    const num = (name: string): number =>
      requiredNumber(cells, col(name), name, lineNo, path);
    const opt = (name: string): number =>
      optionalNumber(cells, col(name), name, lineNo, path);
    rows.push({
      t: num("t"),
      v: [num("v0"), num("v1"), num("v2")],
      y: num("y"),
      vhat: [num("vhat0"), num("vhat1"), num("vhat2")],
      zhat: [opt("zhat0"), opt("zhat1"), opt("zhat2"), opt("zhat3")],
      mode: (cells[col("mode")] ?? "").trim(),
      err: num("err"),
    });
  }
  if (rows.length === 0) {
    throw new Error(`${path}: no data rows`);
  }
  return rows;
}

/**
 * Parse log-error CSV text (columns t, err, log10_err) into typed rows.
 */
export function parseLogErrorCsv(text: string, path: string): LogErrorRow[] {
  const lines = splitCsv(text);
  if (lines.length === 0) {
    throw new Error(`${path}: empty file`);
  }
  const header = lines[0]!;
  const idx = columnIndices(header, LOG_ERROR_COLUMNS, path);

  const rows: LogErrorRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i]!;
    const lineNo = i + 1;
    if (cells.length !== header.length) {
      throw new Error(
        `${path}:${lineNo}: expected ${header.length} cells, found ${cells.length}`,
      );
    }
    rows.push({
      t: requiredNumber(cells, idx.get("t")!, "t", lineNo, path),
      err: requiredNumber(cells, idx.get("err")!, "err", lineNo, path),
      log10Err: requiredNumber(
        cells,
        idx.get("log10_err")!,
        "log10_err",
        lineNo,
        path,
      ),
    });
  }
  if (rows.length === 0) {
    throw new Error(`${path}: no data rows`);
  }
  return rows;
}
