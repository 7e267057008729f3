#!/usr/bin/env node
/**
 * Render the two-panel observer figure from simulation CSV output.
 *
 * Usage:
 *   render_figure <trajectory.csv> <logerr.csv> <out.svg> [summary.json]
 *
 * The optional fourth argument (or --summary <path>) names the run-summary
 * JSON holding the switch-time markers; by default a file named
 * figure_summary.json next to the trajectory CSV is used.  The script only
 * reads the three input files — no simulation code is involved — so it runs
 * anywhere Node runs.
 */

import { writeFileSync } from "fs";
import { pathToFileURL } from "url";

import {
  loadFigureInputs,
  renderFigure,
  resolveSummaryPath,
  type FigureSpec,
} from "./figure.js";

function usage(): string {
  return "usage: render_figure <trajectory.csv> <logerr.csv> <out.svg> [summary.json] [--summary <path>]";
}

/** Parse command-line arguments into a FigureSpec. */
export function parseArgs(argv: string[]): FigureSpec {
  const positional: string[] = [];
  let summaryFlag: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]!;
    if (arg === "--summary") {
      const value = argv[++i];
      if (value === undefined) {
        throw new Error(`--summary needs a path\n${usage()}`);
      }
      summaryFlag = value;
    } else if (arg === "--help" || arg === "-h") {
      throw new Error(usage());
    } else if (arg.startsWith("--")) {
      throw new Error(`unknown option ${arg}\n${usage()}`);
    } else {
      positional.push(arg);
    }
  }
  if (positional.length < 3 || positional.length > 4) {
    throw new Error(usage());
  }
  return {
    trajectoryPath: positional[0]!,
    logErrorPath: positional[1]!,
    outputPath: positional[2]!,
    summaryPath: summaryFlag ?? positional[3],
  };
}

export function main(argv: string[]): number {
  let spec: FigureSpec;
  try {
    spec = parseArgs(argv);
  } catch (e) {
    console.error((e as Error).message);
    return 2;
  }
  try {
    const inputs = loadFigureInputs(spec);
    const svg = renderFigure(inputs);
    writeFileSync(spec.outputPath, svg);
    console.log(
      `parsed ${inputs.trajectory.length} trajectory rows and ` +
        `${inputs.logError.length} error rows (summary: ${resolveSummaryPath(spec)})`,
    );
    for (const ev of inputs.summary.switches) {
      console.log(`switch marker ${ev.direction} at t = ${ev.t}`);
    }
    if (inputs.summary.aborted !== null) {
      console.log(`run was aborted: ${inputs.summary.aborted}`);
    }
    console.log(`wrote ${spec.outputPath}`);
    return 0;
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
