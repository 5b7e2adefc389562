/**
 * The three figure kinds produced from the solver's CSV outputs:
 *
 *  - timeseries: one curve per requested column against time (entropy and its
 *    terms, norms, relative entropy, ...), linear or log axes;
 *  - loglog-sweep: per-preparedness-class curves of a summary value against
 *    epsilon, with a reference slope -1/2 guide line;
 *  - field-snapshot: filled rendering of a per-cell field (2D), or a line
 *    plot fallback for 1D snapshots.
 *
 * Rendering is pure: the same inputs produce byte-identical SVG.
 */

import { writeFileSync } from "fs";

import { readCsv, requireColumns, Table } from "./csv.js";
import { viridis } from "./colormap.js";
import {
  drawAxes,
  fmt,
  HEIGHT,
  MARGIN,
  PALETTE,
  Svg,
  WIDTH,
} from "./svg.js";

export type FigureKind = "timeseries" | "loglog-sweep" | "field-snapshot";

export interface FigureSpec {
  kind: FigureKind;
  csv: string;
  out: string;
  /** timeseries: value columns to draw */
  columns?: string[];
  timeColumn?: string;
  xLog?: boolean;
  yLog?: boolean;
  title?: string;
  /** loglog-sweep: which summary column to plot against epsilon */
  value?: string;
  /** field-snapshot: which field to render */
  field?: string;
}

function finitePairs(xs: number[], ys: number[]): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (let i = 0; i < xs.length; i++) {
    if (Number.isFinite(xs[i]) && Number.isFinite(ys[i])) out.push([xs[i], ys[i]]);
  }
  return out;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!(lo <= hi)) throw new Error("no finite data to plot");
  return [lo, hi];
}

function positiveExtent(values: number[]): [number, number] {
  const pos = values.filter((v) => Number.isFinite(v) && v > 0);
  if (pos.length === 0) throw new Error("log scale needs positive data");
  return [Math.min(...pos), Math.max(...pos)];
}

function legend(svg: Svg, entries: Array<[string, string]>): void {
  let y = MARGIN.top + 8;
  for (const [label, color] of entries) {
    const x = WIDTH - MARGIN.right - 170;
    svg.line(x, y, x + 22, y, color, ' stroke-width="2"');
    svg.text(x + 28, y + 4, label);
    y += 18;
  }
}

export function renderTimeseries(table: Table, spec: FigureSpec): string {
  const timeCol = spec.timeColumn ?? "time";
  const columns = spec.columns ?? [];
  if (columns.length === 0) throw new Error("timeseries needs at least one column");
  requireColumns(table, [timeCol, ...columns]);
  if (table.rows === 0) throw new Error("empty series: no data rows");

  const t = table.numeric.get(timeCol)!;
  const series = columns.map((c) => finitePairs(t, table.numeric.get(c)!));
  if (series.every((s) => s.length === 0)) throw new Error("no finite data to plot");

  const allX = series.flatMap((s) => s.map(([x]) => x));
  const allY = series.flatMap((s) => s.map(([, y]) => y));
  const xr = spec.xLog ? positiveExtent(allX) : extent(allX);
  const yr = spec.yLog ? positiveExtent(allY) : extent(allY);

  const svg = new Svg();
  const { x, y } = drawAxes(svg, {
    title: spec.title ?? "time series",
    xLabel: timeCol,
    yLabel: columns.length === 1 ? columns[0] : "value",
    xLog: spec.xLog,
    yLog: spec.yLog,
    xRange: xr,
    yRange: yr,
  });
  columns.forEach((c, i) => {
    let pts = series[i];
    if (spec.xLog) pts = pts.filter(([px]) => px > 0);
    if (spec.yLog) pts = pts.filter(([, py]) => py > 0);
    const mapped = pts.map(([px, py]) => [x(px), y(py)] as [number, number]);
    const color = PALETTE[i % PALETTE.length];
    if (mapped.length === 1) {
      svg.circle(mapped[0][0], mapped[0][1], 4, color);
    } else if (mapped.length > 1) {
      svg.polyline(mapped, color, ' stroke-width="1.5"');
    }
  });
  legend(svg, columns.map((c, i) => [c, PALETTE[i % PALETTE.length]]));
  return svg.finish();
}

export function renderEpsSweep(table: Table, spec: FigureSpec): string {
  const value = spec.value ?? "dtv_mean_l2";
  requireColumns(table, ["epsilon", "preparedness", value]);
  if (table.rows === 0) throw new Error("empty sweep: no data rows");

  const eps = table.numeric.get("epsilon")!;
  const val = table.numeric.get(value)!;
  const cls = table.raw.get("preparedness")!;
  const groups = new Map<string, Array<[number, number]>>();
  for (let i = 0; i < table.rows; i++) {
    if (!(eps[i] > 0) || !(val[i] > 0)) continue; // log-log: skip nonpositive
    if (!groups.has(cls[i])) groups.set(cls[i], []);
    groups.get(cls[i])!.push([eps[i], val[i]]);
  }
  if (groups.size === 0) throw new Error("no positive data for the log-log sweep");

  const allPts = [...groups.values()].flat();
  const xr: [number, number] = [
    Math.min(...allPts.map(([e]) => e)),
    Math.max(...allPts.map(([e]) => e)),
  ];
  const yr: [number, number] = [
    Math.min(...allPts.map(([, v]) => v)),
    Math.max(...allPts.map(([, v]) => v)),
  ];

  const svg = new Svg();
  const { x, y } = drawAxes(svg, {
    title: spec.title ?? `${value} vs epsilon`,
    xLabel: "epsilon",
    yLabel: value,
    xLog: true,
    yLog: true,
    xRange: xr,
    yRange: yr,
  });

  // reference slope -1/2 guide anchored at the largest-value point
  const anchor = allPts.reduce((a, b) => (b[1] > a[1] ? b : a));
  const guide: Array<[number, number]> = [
    [xr[0], anchor[1] * Math.sqrt(anchor[0] / xr[0])],
    [xr[1], anchor[1] * Math.sqrt(anchor[0] / xr[1])],
  ];
  svg.polyline(
    guide.map(([gx, gy]) => [x(gx), y(Math.max(gy, yr[0]))] as [number, number]),
    "#999",
    ' stroke-dasharray="6,4"',
  );
  svg.text(x(guide[0][0]) + 8, y(Math.max(guide[0][1], yr[0])) - 6, "slope -1/2");

  const labels: Array<[string, string]> = [];
  let i = 0;
  for (const [name, pts] of [...groups.entries()].sort()) {
    const color = PALETTE[i % PALETTE.length];
    const sorted = [...pts].sort((a, b) => a[0] - b[0]);
    const mapped = sorted.map(([e, v]) => [x(e), y(v)] as [number, number]);
    if (mapped.length > 1) svg.polyline(mapped, color, ' stroke-width="1.5"');
    for (const [px, py] of mapped) svg.circle(px, py, 3, color);
    labels.push([name, color]);
    i += 1;
  }
  legend(svg, labels);
  return svg.finish();
}

export function renderField(table: Table, spec: FigureSpec): string {
  const field = spec.field ?? "u";
  requireColumns(table, ["x", field]);
  if (table.rows === 0) throw new Error("empty snapshot: no cells");
  const is2d = table.columns.includes("y");
  const xs = table.numeric.get("x")!;
  const vals = table.numeric.get(field)!;

  if (!is2d) {
    // 1D fallback: value against x as a line plot
    const pts = finitePairs(xs, vals).sort((a, b) => a[0] - b[0]);
    const svg = new Svg();
    const { x, y } = drawAxes(svg, {
      title: spec.title ?? `${field} snapshot`,
      xLabel: "x",
      yLabel: field,
      xRange: extent(xs),
      yRange: extent(vals),
    });
    const mapped = pts.map(([px, py]) => [x(px), y(py)] as [number, number]);
    if (mapped.length === 1) svg.circle(mapped[0][0], mapped[0][1], 4, PALETTE[0]);
    else svg.polyline(mapped, PALETTE[0], ' stroke-width="1.5"');
    return svg.finish();
  }

  const ys = table.numeric.get("y")!;
  const [xLo, xHi] = extent(xs);
  const [yLo, yHi] = extent(ys);
  const [vLo, vHi] = extent(vals); // per-frame color scale
  const span = Math.max(xHi - xLo, yHi - yLo, 1e-300);

  // square drawing area preserving the aspect ratio
  const plotW = WIDTH - MARGIN.left - MARGIN.right - 60; // leave room for the colorbar
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const side = Math.min(plotW, plotH);
  const px = (v: number) => MARGIN.left + ((v - xLo) / span) * side;
  const py = (v: number) => MARGIN.top + side - ((v - yLo) / span) * side;

  // marker size from the mean cell spacing
  const r = (0.62 * side) / Math.sqrt(table.rows) / Math.sqrt(span / (xHi - xLo || 1));

  const svg = new Svg();
  svg.text(WIDTH / 2, 22, spec.title ?? `${field} snapshot`, ' text-anchor="middle" font-size="15"');
  for (let i = 0; i < table.rows; i++) {
    if (!Number.isFinite(vals[i])) throw new Error(`non-finite ${field} at cell ${i}`);
    const t = vHi > vLo ? (vals[i] - vLo) / (vHi - vLo) : 0.5;
    svg.circle(px(xs[i]), py(ys[i]), r, viridis(t));
  }
  // colorbar
  const cbX = MARGIN.left + side + 24;
  const steps = 64;
  for (let i = 0; i < steps; i++) {
    const t = 1 - i / (steps - 1);
    svg.rect(cbX, MARGIN.top + (i * side) / steps, 16, side / steps + 1, viridis(t));
  }
  svg.text(cbX + 22, MARGIN.top + 10, fmt(vHi));
  svg.text(cbX + 22, MARGIN.top + side, fmt(vLo));
  return svg.finish();
}

export function renderFigure(spec: FigureSpec): string {
  const table = readCsv(spec.csv);
  switch (spec.kind) {
    case "timeseries":
      return renderTimeseries(table, spec);
    case "loglog-sweep":
      return renderEpsSweep(table, spec);
    case "field-snapshot":
      return renderField(table, spec);
    default:
      throw new Error(`unknown figure kind ${(spec as FigureSpec).kind}`);
  }
}

export function writeFigure(spec: FigureSpec): string {
  const svg = renderFigure(spec);
  writeFileSync(spec.out, svg);
  return spec.out;
}
