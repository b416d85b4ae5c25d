/** Annotation JSON: {"size":[W,H],"junctions":[[x,y],...],"segments":[[i,j],...]}.
 *
 * Serialization is canonical (compact separators, integral coordinates as
 * integers) and byte-compatible with the training-side serializer; the shared
 * fixture corpus in ../fixtures pins that.
 */

import type { EditableWireframe } from "./types.js";

export class SchemaError extends Error {}

export interface AnnotationJson {
  size: [number, number];
  junctions: [number, number][];
  segments: [number, number][];
}

/** Largest double below the canvas bound; mirrors the clamping rule used by
 * the training pipeline. */
function clamp(v: number, hi: number): number {
  if (!Number.isFinite(v)) throw new SchemaError("junction coordinates must be finite");
  if (v < 0) return 0;
  if (v >= hi) {
    let below = hi;
    do {
      below = below - below * Number.EPSILON;
    } while (below >= hi);
    return below;
  }
  return v;
}

export function toAnnotation(wf: EditableWireframe): AnnotationJson {
  const index = new Map<number, number>();
  wf.junctions.forEach((j, i) => index.set(j.id, i));
  return {
    size: [wf.size[0], wf.size[1]],
    junctions: wf.junctions.map((j) => [j.x, j.y] as [number, number]),
    segments: wf.segments.map((s) => {
      const a = index.get(s.a);
      const b = index.get(s.b);
      if (a === undefined || b === undefined) {
        throw new SchemaError(`segment ${s.id} references a missing junction`);
      }
      return [a, b] as [number, number];
    }),
  };
}

export function serializeWireframe(wf: EditableWireframe): string {
  return JSON.stringify(toAnnotation(wf));
}

export function validateAnnotation(obj: unknown): AnnotationJson {
  if (typeof obj !== "object" || obj === null) {
    throw new SchemaError("annotation must be a JSON object");
  }
  const record = obj as Record<string, unknown>;
  for (const key of ["size", "junctions", "segments"]) {
    if (!(key in record)) throw new SchemaError(`annotation missing key '${key}'`);
  }
  const size = record.size;
  if (!Array.isArray(size) || size.length !== 2) {
    throw new SchemaError("'size' must be [W, H]");
  }
  const [w, h] = size.map(Number) as [number, number];
  if (!(w >= 1 && h >= 1)) throw new SchemaError("canvas size must be positive");
  const junctions = (record.junctions as unknown[]).map((p, i) => {
    if (!Array.isArray(p) || p.length !== 2) {
      throw new SchemaError(`junction ${i} must be [x, y]`);
    }
    return [clamp(Number(p[0]), w), clamp(Number(p[1]), h)] as [number, number];
  });
  const seen = new Set<string>();
  const segments = (record.segments as unknown[]).map((s, k) => {
    if (!Array.isArray(s) || s.length !== 2) {
      throw new SchemaError(`segment ${k} must be [i, j]`);
    }
    const a = Number(s[0]);
    const b = Number(s[1]);
    if (!Number.isInteger(a) || a < 0 || a >= junctions.length) {
      throw new SchemaError(`segment ${k} references missing junction index ${a}`);
    }
    if (!Number.isInteger(b) || b < 0 || b >= junctions.length) {
      throw new SchemaError(`segment ${k} references missing junction index ${b}`);
    }
    if (a === b) throw new SchemaError(`segment ${k} connects junction ${a} to itself`);
    const key = `${Math.min(a, b)}:${Math.max(a, b)}`;
    if (seen.has(key)) throw new SchemaError(`duplicate segment ${k}: ${key}`);
    seen.add(key);
    return [a, b] as [number, number];
  });
  return { size: [w, h], junctions, segments };
}

export function parseWireframe(text: string): EditableWireframe {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (e) {
    throw new SchemaError(`malformed wireframe JSON: ${(e as Error).message}`);
  }
  const ann = validateAnnotation(raw);
  return {
    size: ann.size,
    junctions: ann.junctions.map(([x, y], i) => ({ id: i, x, y })),
    segments: ann.segments.map(([a, b], k) => ({ id: k, a, b })),
    nextId: ann.junctions.length + ann.segments.length,
  };
}

export function emptyWireframe(size = 256): EditableWireframe {
  return { size: [size, size], junctions: [], segments: [], nextId: 0 };
}
