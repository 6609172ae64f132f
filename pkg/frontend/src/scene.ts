/**
 * Declarative render model. Views build Scene objects; the DOM layer
 * materializes them as SVG. Keeping views free of DOM access lets tests
 * assert on every displayed value without a browser.
 */

export interface Mark {
  type: "rect" | "circle" | "line" | "text" | "path" | "symbol";
  x: number;
  y: number;
  width?: number;
  height?: number;
  r?: number;
  x2?: number;
  y2?: number;
  points?: [number, number][];
  text?: string;
  fill?: string;
  stroke?: string;
  symbol?: "plus" | "diamond" | "rect";
  /** The exact API value this mark displays, when it displays one. */
  value?: number;
  /** Identifier for hit-testing and tests. */
  key?: string;
  tooltip?: string;
  dashed?: boolean;
}

export interface Scene {
  width: number;
  height: number;
  marks: Mark[];
}

export function marksByKeyPrefix(scene: Scene, prefix: string): Mark[] {
  return scene.marks.filter((m) => m.key !== undefined && m.key.startsWith(prefix));
}

export function markByKey(scene: Scene, key: string): Mark {
  const found = scene.marks.find((m) => m.key === key);
  if (!found) throw new Error(`no mark with key ${key}`);
  return found;
}

/** Linear mapping from a data domain onto pixel range. */
export class LinearScale {
  constructor(
    private d0: number,
    private d1: number,
    private r0: number,
    private r1: number,
  ) {}

  static fromValues(values: number[], r0: number, r1: number): LinearScale {
    let lo = Math.min(...values);
    let hi = Math.max(...values);
    if (!isFinite(lo) || !isFinite(hi)) {
      lo = 0;
      hi = 1;
    }
    if (lo === hi) {
      lo -= 0.5;
      hi += 0.5;
    }
    return new LinearScale(lo, hi, r0, r1);
  }

  map(v: number): number {
    return this.r0 + ((v - this.d0) / (this.d1 - this.d0)) * (this.r1 - this.r0);
  }
}
