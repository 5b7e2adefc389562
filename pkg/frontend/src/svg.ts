/**
 * Minimal deterministic SVG chart scaffolding: fixed canvas, linear or log
 * axes with tick labels, polylines, markers and filled shapes.  All floats
 * are formatted with a fixed precision so identical inputs yield identical
 * bytes.
 */

export const WIDTH = 720;
export const HEIGHT = 480;
export const MARGIN = { left: 72, right: 24, top: 40, bottom: 52 };

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  const s = x.toFixed(3);
  return s === "-0.000" ? "0.000" : s;
}

export interface Scale {
  (value: number): number;
  ticks: number[];
  log: boolean;
}

function niceLinearTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / (n * step);
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const first = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += s) out.push(v);
  return out;
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9); Math.pow(10, e) <= hi * (1 + 1e-9); e++) {
    out.push(Math.pow(10, e));
  }
  return out.length ? out : [lo];
}

export function makeScale(
  lo: number,
  hi: number,
  rangeLo: number,
  rangeHi: number,
  log: boolean,
): Scale {
  if (log) {
    if (lo <= 0) throw new Error("log scale needs positive data");
    const a = Math.log10(lo);
    const b = Math.log10(hi > lo ? hi : lo * 10);
    const f = (v: number) =>
      rangeLo + ((Math.log10(v) - a) / (b - a)) * (rangeHi - rangeLo);
    const scale = f as Scale;
    scale.ticks = logTicks(lo, hi);
    scale.log = true;
    return scale;
  }
  const span = hi > lo ? hi - lo : 1;
  const f = (v: number) => rangeLo + ((v - lo) / span) * (rangeHi - rangeLo);
  const scale = f as Scale;
  scale.ticks = niceLinearTicks(lo, hi);
  scale.log = false;
  return scale;
}

export function tickLabel(v: number, log: boolean): string {
  if (log) {
    const e = Math.round(Math.log10(v));
    return `1e${e}`;
  }
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return Number(v.toPrecision(4)).toString();
}

export class Svg {
  private parts: string[] = [];

  constructor(width = WIDTH, height = HEIGHT) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, extra = ""): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}"${extra}/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, extra = ""): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}"${extra}/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${fmt(r)}" fill="${fill}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`,
    );
  }

  text(x: number, y: number, s: string, extra = ""): void {
    this.parts.push(`<text x="${fmt(x)}" y="${fmt(y)}"${extra}>${escapeXml(s)}</text>`);
  }

  finish(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface AxesOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  xLog?: boolean;
  yLog?: boolean;
  xRange: [number, number];
  yRange: [number, number];
}

export function drawAxes(svg: Svg, opt: AxesOptions): { x: Scale; y: Scale } {
  const x = makeScale(opt.xRange[0], opt.xRange[1], MARGIN.left, WIDTH - MARGIN.right, !!opt.xLog);
  const y = makeScale(opt.yRange[0], opt.yRange[1], HEIGHT - MARGIN.bottom, MARGIN.top, !!opt.yLog);
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  svg.line(x0, y0, x1, y0, "#222");
  svg.line(x0, y0, x0, y1, "#222");
  for (const t of x.ticks) {
    const px = x(t);
    svg.line(px, y0, px, y0 + 5, "#222");
    svg.line(px, y0, px, y1, "#eee");
    svg.text(px, y0 + 18, tickLabel(t, x.log), ' text-anchor="middle"');
  }
  for (const t of y.ticks) {
    const py = y(t);
    svg.line(x0 - 5, py, x0, py, "#222");
    svg.line(x0, py, x1, py, "#eee");
    svg.text(x0 - 8, py + 4, tickLabel(t, y.log), ' text-anchor="end"');
  }
  svg.text(WIDTH / 2, 22, opt.title, ' text-anchor="middle" font-size="15"');
  svg.text(WIDTH / 2, HEIGHT - 14, opt.xLabel, ' text-anchor="middle"');
  svg.text(16, HEIGHT / 2, opt.yLabel, ` text-anchor="middle" transform="rotate(-90 16 ${HEIGHT / 2})"`);
  return { x, y };
}

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];
