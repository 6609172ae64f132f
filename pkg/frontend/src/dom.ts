/**
 * Thin SVG materializer for scenes. All geometry and values arrive
 * precomputed in the scene marks; this layer only creates elements.
 */

import { Mark, Scene } from "./scene.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el(name: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, name);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

function symbolPath(mark: Mark): string {
  const { x, y } = mark;
  const r = mark.r ?? 4;
  switch (mark.symbol) {
    case "plus":
      return `M ${x - r} ${y} H ${x + r} M ${x} ${y - r} V ${y + r}`;
    case "diamond":
      return `M ${x} ${y - r} L ${x + r} ${y} L ${x} ${y + r} L ${x - r} ${y} Z`;
    default:
      return `M ${x - r} ${y - r} H ${x + r} V ${y + r} H ${x - r} Z`;
  }
}

export function renderScene(scene: Scene, container: HTMLElement): SVGSVGElement {
  const svg = el("svg", {
    width: scene.width,
    height: scene.height,
    viewBox: `0 0 ${scene.width} ${scene.height}`,
  }) as SVGSVGElement;
  for (const mark of scene.marks) {
    let node: SVGElement;
    switch (mark.type) {
      case "rect":
        node = el("rect", {
          x: mark.x,
          y: mark.y,
          width: mark.width ?? 0,
          height: mark.height ?? 0,
          fill: mark.fill ?? "#000",
        });
        break;
      case "circle":
        node = el("circle", { cx: mark.x, cy: mark.y, r: mark.r ?? 2, fill: mark.fill ?? "#000" });
        break;
      case "line":
        node = el("line", {
          x1: mark.x,
          y1: mark.y,
          x2: mark.x2 ?? mark.x,
          y2: mark.y2 ?? mark.y,
          stroke: mark.stroke ?? "#000",
        });
        break;
      case "path":
        node = el("path", {
          d: (mark.points ?? [])
            .map(([px, py], i) => `${i === 0 ? "M" : "L"} ${px} ${py}`)
            .join(" "),
          fill: mark.fill ?? "none",
          stroke: mark.stroke ?? "#000",
        });
        break;
      case "symbol":
        node = el("path", {
          d: symbolPath(mark),
          fill: mark.fill ?? "#000",
          stroke: mark.stroke ?? mark.fill ?? "#000",
        });
        break;
      case "text": {
        node = el("text", { x: mark.x, y: mark.y, "font-size": 11 });
        node.textContent = mark.text ?? "";
        break;
      }
    }
    if (mark.stroke && mark.type !== "line" && mark.type !== "path") {
      node.setAttribute("stroke", mark.stroke);
    }
    if (mark.dashed) node.setAttribute("stroke-dasharray", "4 3");
    if (mark.key) node.setAttribute("data-key", mark.key);
    if (mark.value !== undefined) node.setAttribute("data-value", String(mark.value));
    if (mark.tooltip) {
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = mark.tooltip;
      node.appendChild(title);
    }
    svg.appendChild(node);
  }
  container.appendChild(svg);
  return svg;
}
