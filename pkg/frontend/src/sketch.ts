import type { StationaryPoint, TripDetail } from "./types.js";

// Trip trace as a standalone SVG in normalized local coordinates: the
// polyline plus one circle per stationary point, colored by destination
// classification, radius linear in stop duration.

const SVG_NS = "http://www.w3.org/2000/svg";

export const VIEW_WIDTH = 420;
export const VIEW_HEIGHT = 300;
export const PADDING = 18;
export const MAX_MARKER_RADIUS = 14;

export const MARKER_COLORS: Record<string, string> = {
  commercial: "#d43f3f",
  residential: "#3b6fd4",
  home: "#2f9e60",
};
const UNKNOWN_COLOR = "#8a8a8a";

interface Projection {
  x(lon: number): number;
  y(lat: number): number;
}

function projection(detail: TripDetail): Projection {
  const lats = detail.polyline.map((p) => p.lat);
  const lons = detail.polyline.map((p) => p.lon);
  for (const s of detail.stationary_points) {
    lats.push(s.latitude);
    lons.push(s.longitude);
  }
  if (detail.home) {
    lats.push(detail.home.lat);
    lons.push(detail.home.lon);
  }
  const latMin = Math.min(...lats);
  const lonMin = Math.min(...lons);
  const latSpan = Math.max(Math.max(...lats) - latMin, 1e-9);
  const lonSpan = Math.max(Math.max(...lons) - lonMin, 1e-9);
  const w = VIEW_WIDTH - 2 * PADDING;
  const h = VIEW_HEIGHT - 2 * PADDING;
  // preserve aspect ratio; latitude grows upward while y grows downward
  const scale = Math.min(w / lonSpan, h / latSpan);
  const xOff = PADDING + (w - lonSpan * scale) / 2;
  const yOff = PADDING + (h - latSpan * scale) / 2;
  return {
    x: (lon) => xOff + (lon - lonMin) * scale,
    y: (lat) => yOff + (latMin + latSpan - lat) * scale,
  };
}

export function markerColor(point: StationaryPoint): string {
  return (
    (point.classification && MARKER_COLORS[point.classification]) ??
    UNKNOWN_COLOR
  );
}

export function tripSketch(detail: TripDetail, doc: Document): SVGSVGElement {
  const svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
  svg.setAttribute("viewBox", `0 0 ${VIEW_WIDTH} ${VIEW_HEIGHT}`);
  svg.setAttribute("class", "trip-sketch");
  svg.setAttribute("role", "img");
  if (detail.polyline.length === 0) return svg;

  const proj = projection(detail);
  const line = doc.createElementNS(SVG_NS, "polyline");
  line.setAttribute(
    "points",
    detail.polyline
      .map((p) => `${proj.x(p.lon).toFixed(2)},${proj.y(p.lat).toFixed(2)}`)
      .join(" "),
  );
  line.setAttribute("class", "trace");
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "#666");
  line.setAttribute("stroke-width", "1.5");
  svg.appendChild(line);

  if (detail.home) {
    const home = doc.createElementNS(SVG_NS, "rect");
    const size = 8;
    home.setAttribute("x", (proj.x(detail.home.lon) - size / 2).toFixed(2));
    home.setAttribute("y", (proj.y(detail.home.lat) - size / 2).toFixed(2));
    home.setAttribute("width", String(size));
    home.setAttribute("height", String(size));
    home.setAttribute("class", "home-marker");
    home.setAttribute("fill", "none");
    home.setAttribute("stroke", MARKER_COLORS.home);
    home.setAttribute("stroke-width", "2");
    svg.appendChild(home);
  }

  const maxDuration = Math.max(
    ...detail.stationary_points.map((s) => s.duration_s),
    0,
  );
  for (const stop of detail.stationary_points) {
    const marker = doc.createElementNS(SVG_NS, "circle");
    marker.setAttribute("cx", proj.x(stop.longitude).toFixed(2));
    marker.setAttribute("cy", proj.y(stop.latitude).toFixed(2));
    // radius strictly proportional to time stopped
    const radius = (stop.duration_s / maxDuration) * MAX_MARKER_RADIUS;
    marker.setAttribute("r", String(radius));
    marker.setAttribute("fill", markerColor(stop));
    marker.setAttribute("fill-opacity", "0.55");
    marker.setAttribute("class", "stop-marker");
    marker.setAttribute("data-duration", String(stop.duration_s));
    marker.setAttribute("data-classification", stop.classification ?? "none");
    const title = doc.createElementNS(SVG_NS, "title");
    title.textContent =
      `${stop.classification ?? "unclassified"} stop, ` +
      `${Math.round(stop.duration_s / 60)} min`;
    marker.appendChild(title);
    svg.appendChild(marker);
  }
  return svg;
}
