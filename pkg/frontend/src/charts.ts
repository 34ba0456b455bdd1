/** Dependency-free SVG chart rendering.
 *
 * Bars carry the per-bucket distribution, a line overlay carries the
 * trend, pies carry composition shares. Every mark embeds its exact
 * payload value in a data-value attribute: rendered data IS the API
 * payload, nothing is re-aggregated client-side.
 */

export interface ChartPoint {
  label: string;
  value: number;
}

const WIDTH = 720;
const HEIGHT = 260;
const PAD = { top: 16, right: 12, bottom: 44, left: 56 };
const PALETTE = [
  "#2563eb", "#059669", "#d97706", "#dc2626", "#7c3aed",
  "#0d9488", "#f59e0b", "#6366f1", "#db2777", "#65a30d",
];

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/"/g, "&quot;");
}

function fmt(value: number): string {
  return value >= 1000 ? value.toFixed(0) : value.toPrecision(4);
}

/** Bar chart with an optional line+dot overlay for the trend. */
export function barLineChart(points: ChartPoint[], overlayLine = true): string {
  if (points.length === 0) {
    return `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" class="chart chart-empty"></svg>`;
  }
  const plotW = WIDTH - PAD.left - PAD.right;
  const plotH = HEIGHT - PAD.top - PAD.bottom;
  const peak = Math.max(...points.map((p) => p.value), 0) || 1;
  const step = plotW / points.length;
  const barW = Math.max(2, step * 0.72);

  const parts: string[] = [];
  const centers: [number, number][] = [];
  points.forEach((point, index) => {
    const h = (point.value / peak) * plotH;
    const x = PAD.left + index * step + (step - barW) / 2;
    const y = PAD.top + plotH - h;
    parts.push(
      `<rect class="bar" x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${barW.toFixed(1)}" ` +
        `height="${h.toFixed(1)}" fill="${PALETTE[0]}" data-label="${esc(point.label)}" ` +
        `data-value="${point.value}"><title>${esc(point.label)}: ${fmt(point.value)} Wh</title></rect>`,
    );
    centers.push([PAD.left + index * step + step / 2, y]);
  });
  if (overlayLine && points.length > 1) {
    const path = centers.map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`).join(" ");
    parts.push(
      `<polyline class="trend" points="${path}" fill="none" stroke="${PALETTE[3]}" stroke-width="2"/>`,
    );
    centers.forEach(([x, y], index) => {
      parts.push(
        `<circle class="trend-dot" cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="3" ` +
          `fill="${PALETTE[3]}" data-value="${points[index]!.value}"/>`,
      );
    });
  }
  // x labels: thin out when crowded
  const every = Math.ceil(points.length / 12);
  points.forEach((point, index) => {
    if (index % every !== 0) return;
    const x = PAD.left + index * step + step / 2;
    parts.push(
      `<text class="x-label" x="${x.toFixed(1)}" y="${HEIGHT - 8}" text-anchor="middle" ` +
        `font-size="10">${esc(point.label)}</text>`,
    );
  });
  parts.push(
    `<text class="y-peak" x="4" y="${PAD.top + 10}" font-size="10">${fmt(peak)} Wh</text>`,
  );
  return `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" class="chart chart-bars" role="img">${parts.join("")}</svg>`;
}

/** Pie for composition. Returns null when there is nothing to show, so
 * callers render an empty-state message instead of an empty circle. */
export function pieChart(slices: ChartPoint[]): string | null {
  const total = slices.reduce((sum, slice) => sum + slice.value, 0);
  if (slices.length === 0 || total <= 0) {
    return null;
  }
  const cx = 130;
  const cy = 130;
  const r = 110;
  const parts: string[] = [];
  let angle = -Math.PI / 2;
  slices.forEach((slice, index) => {
    const span = (slice.value / total) * Math.PI * 2;
    const x1 = cx + r * Math.cos(angle);
    const y1 = cy + r * Math.sin(angle);
    const end = angle + span;
    const x2 = cx + r * Math.cos(end);
    const y2 = cy + r * Math.sin(end);
    const large = span > Math.PI ? 1 : 0;
    const color = PALETTE[index % PALETTE.length];
    const share = ((slice.value / total) * 100).toFixed(1);
    // a full-circle slice degenerates as a path; draw a circle instead
    const shape =
      span >= Math.PI * 2 - 1e-9
        ? `<circle class="slice" cx="${cx}" cy="${cy}" r="${r}" fill="${color}" ` +
          `data-label="${esc(slice.label)}" data-value="${slice.value}" data-share="${share}">` +
          `<title>${esc(slice.label)}: ${share}%</title></circle>`
        : `<path class="slice" d="M${cx},${cy} L${x1.toFixed(2)},${y1.toFixed(2)} ` +
          `A${r},${r} 0 ${large} 1 ${x2.toFixed(2)},${y2.toFixed(2)} Z" fill="${color}" ` +
          `data-label="${esc(slice.label)}" data-value="${slice.value}" data-share="${share}">` +
          `<title>${esc(slice.label)}: ${share}%</title></path>`;
    parts.push(shape);
    angle = end;
  });
  const legend = slices
    .map((slice, index) => {
      const color = PALETTE[index % PALETTE.length];
      return (
        `<div class="legend-row"><span class="swatch" style="background:${color}"></span>` +
        `${esc(slice.label)} — ${fmt(slice.value)} Wh</div>`
      );
    })
    .join("");
  return (
    `<div class="pie-wrap"><svg viewBox="0 0 260 260" class="chart chart-pie" role="img">` +
    `${parts.join("")}</svg><div class="legend">${legend}</div></div>`
  );
}
