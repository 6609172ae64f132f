/**
 * Color scales for the workbench. Contribution cells use a diverging
 * blue-white-red scale over a symmetric domain so zero is exactly white;
 * risks use a white-to-red ramp over [0, 1].
 */

function mix(a: [number, number, number], b: [number, number, number], t: number): string {
  const c = a.map((v, i) => Math.round(v + (b[i] - v) * t));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

const BLUE: [number, number, number] = [42, 98, 255];
const WHITE: [number, number, number] = [255, 255, 255];
const RED: [number, number, number] = [214, 39, 40];

export class DivergingScale {
  /** Symmetric domain [-limit, +limit]; zero maps to white exactly. */
  constructor(public limit: number) {
    if (!(limit >= 0)) throw new Error("scale limit must be non-negative");
  }

  static fromValues(values: number[]): DivergingScale {
    const m = values.reduce((acc, v) => Math.max(acc, Math.abs(v)), 0);
    return new DivergingScale(m);
  }

  color(value: number): string {
    if (value === 0 || this.limit === 0) return mix(WHITE, WHITE, 0);
    const t = Math.max(-1, Math.min(1, value / this.limit));
    return t < 0 ? mix(WHITE, BLUE, -t) : mix(WHITE, RED, t);
  }
}

export class RiskScale {
  /** White at 0, fully red at 1. */
  color(risk: number): string {
    const t = Math.max(0, Math.min(1, risk));
    return mix(WHITE, RED, t);
  }
}

export const KIND_COLORS: Record<string, string> = {
  diagnosis: "#2ca02c",
  prescription: "#9467bd",
  treatment: "#e6b012",
};

export const KIND_SYMBOLS: Record<string, "plus" | "diamond" | "rect"> = {
  diagnosis: "plus",
  prescription: "diamond",
  treatment: "rect",
};
