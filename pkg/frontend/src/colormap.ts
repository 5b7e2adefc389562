/** Viridis colormap via a sampled table with linear interpolation. */

const TABLE: Array<[number, number, number]> = [
  [68, 1, 84],
  [71, 44, 122],
  [59, 81, 139],
  [44, 113, 142],
  [33, 144, 141],
  [39, 173, 129],
  [92, 200, 99],
  [170, 220, 50],
  [253, 231, 37],
];

export function viridis(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (TABLE.length - 1);
  const i = Math.min(TABLE.length - 2, Math.floor(pos));
  const f = pos - i;
  const mix = (a: number, b: number) => Math.round(a + f * (b - a));
  const [r1, g1, b1] = TABLE[i];
  const [r2, g2, b2] = TABLE[i + 1];
  return `rgb(${mix(r1, r2)},${mix(g1, g2)},${mix(b1, b2)})`;
}
