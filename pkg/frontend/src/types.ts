/** Core editor data model. Junctions and segments carry stable ids so edits
 * and selection survive deletions; the annotation wire format is index-based
 * and produced by schema.ts. */

export interface Junction {
  id: number;
  x: number;
  y: number;
}

export interface Segment {
  id: number;
  /** junction ids, a !== b */
  a: number;
  b: number;
}

export interface EditableWireframe {
  size: [number, number];
  junctions: Junction[];
  segments: Segment[];
  nextId: number;
}

export interface Selection {
  junctions: number[];
  segments: number[];
}

export interface RenderResult {
  /** base64 PNG payloads from the service */
  scene: string;
  reconstructedWireframe: string;
  latencyMs: number;
  modelVersion: string;
  /** serialized wireframe the render was produced from */
  source: string;
}

export type GuidanceSource =
  | { kind: "none" }
  | { kind: "reference"; name: string; histogram: number[][] };

export interface EditorState {
  wireframe: EditableWireframe;
  selection: Selection;
  undoStack: Snapshot[];
  redoStack: Snapshot[];
  guidance: GuidanceSource;
  lastRender: RenderResult | null;
  /** comparison strip: most recent render first, at most 4 kept */
  renderHistory: RenderResult[];
  dirty: boolean;
  /** inline validation badge text (rejected edits, 422 responses) */
  validationError: string | null;
  /** retry banner text (network failures); editing state is preserved */
  serviceError: string | null;
}

export interface Snapshot {
  wireframe: EditableWireframe;
  selection: Selection;
}

export type EditorAction =
  | { type: "add_junction"; x: number; y: number }
  | { type: "move_junction"; id: number; x: number; y: number }
  | { type: "delete_junction"; id: number }
  | { type: "add_segment"; a: number; b: number }
  | { type: "delete_segment"; id: number }
  | { type: "select"; junctions: number[]; segments: number[] }
  | { type: "undo" }
  | { type: "redo" }
  | { type: "set_guidance"; name: string; histogram: number[][] }
  | { type: "clear_guidance" }
  | { type: "render_succeeded"; result: RenderResult }
  | { type: "render_failed"; message: string; validation: boolean }
  | { type: "clear_errors" };
