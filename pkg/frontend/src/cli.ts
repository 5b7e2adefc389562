/**
 * Figure CLI:
 *
 *   node dist/cli.js timeseries --csv observables.csv --columns entropy,entropy_boltzmann --out fig.svg
 *   node dist/cli.js sweep --csv ap_summary.csv --value dtv_mean_l2 --out fig.svg
 *   node dist/cli.js field --csv snapshot_t2000.csv --field u --out fig.svg
 */

import { FigureKind, FigureSpec, writeFigure } from "./plots.js";

function parseArgs(argv: string[]): FigureSpec {
  const [mode, ...rest] = argv;
  const kinds: Record<string, FigureKind> = {
    timeseries: "timeseries",
    sweep: "loglog-sweep",
    field: "field-snapshot",
  };
  if (!(mode in kinds)) {
    throw new Error(`usage: cli (timeseries|sweep|field) --csv FILE --out FILE [options]`);
  }
  const opts = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i];
    if (!key.startsWith("--")) throw new Error(`unexpected argument ${key}`);
    if (key === "--xlog" || key === "--ylog") {
      opts.set(key.slice(2), "true");
      i -= 1;
      continue;
    }
    const value = rest[i + 1];
    if (value === undefined) throw new Error(`missing value for ${key}`);
    opts.set(key.slice(2), value);
  }
  const need = (k: string): string => {
    const v = opts.get(k);
    if (v === undefined) throw new Error(`missing required --${k}`);
    return v;
  };
  const spec: FigureSpec = {
    kind: kinds[mode],
    csv: need("csv"),
    out: need("out"),
    title: opts.get("title"),
    xLog: opts.has("xlog"),
    yLog: opts.has("ylog"),
  };
  if (opts.has("columns")) spec.columns = opts.get("columns")!.split(",");
  if (opts.has("time-column")) spec.timeColumn = opts.get("time-column");
  if (opts.has("value")) spec.value = opts.get("value");
  if (opts.has("field")) spec.field = opts.get("field");
  return spec;
}

export function main(argv: string[]): number {
  try {
    const out = writeFigure(parseArgs(argv));
    console.log(`wrote ${out}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
