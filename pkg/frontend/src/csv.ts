/**
 * Reader for the solver's CSV outputs.
 *
 * Files are comma-separated with a single header line; every value is a
 * number (or "nan"), except the `preparedness` column of the sweep summary.
 * The reader never reorders or mutates rows.
 */

import { readFileSync } from "fs";

export interface Table {
  columns: string[];
  /** numeric columns by name; non-numeric entries become NaN */
  numeric: Map<string, number[]>;
  /** raw string columns by name */
  raw: Map<string, string[]>;
  rows: number;
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV: no header line");
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const raw = new Map<string, string[]>(columns.map((c) => [c, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new Error(`row ${i} has ${cells.length} cells, expected ${columns.length}`);
    }
    columns.forEach((c, j) => raw.get(c)!.push(cells[j]));
  }
  const numeric = new Map<string, number[]>();
  for (const c of columns) {
    numeric.set(
      c,
      raw.get(c)!.map((s) => Number(s)),
    );
  }
  return { columns, numeric, raw, rows: lines.length - 1 };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new Error(
        `missing column '${name}'; file has: ${table.columns.join(", ")}`,
      );
    }
  }
}
