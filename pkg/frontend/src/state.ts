/** Pure editor reducer: (state, action) -> state.
 *
 * The five edit actions snapshot the previous wireframe+selection onto the
 * undo stack (clearing redo); undo/redo move snapshots between stacks and
 * restore them exactly. Invalid edits (self-segments, duplicates, missing
 * targets) leave the wireframe untouched and surface an inline validation
 * message. Render/guidance bookkeeping never touches the undo history.
 */

import type {
  EditableWireframe,
  EditorAction,
  EditorState,
  Selection,
  Snapshot,
} from "./types.js";
import { emptyWireframe } from "./schema.js";

export const RENDER_HISTORY_LIMIT = 4;

export function initialState(size = 256): EditorState {
  return {
    wireframe: emptyWireframe(size),
    selection: { junctions: [], segments: [] },
    undoStack: [],
    redoStack: [],
    guidance: { kind: "none" },
    lastRender: null,
    renderHistory: [],
    dirty: false,
    validationError: null,
    serviceError: null,
  };
}

function snapshot(state: EditorState): Snapshot {
  return { wireframe: state.wireframe, selection: state.selection };
}

function withEdit(
  state: EditorState,
  wireframe: EditableWireframe,
  selection: Selection = state.selection,
): EditorState {
  return {
    ...state,
    wireframe,
    selection,
    undoStack: [...state.undoStack, snapshot(state)],
    redoStack: [],
    dirty: true,
    validationError: null,
  };
}

function reject(state: EditorState, message: string): EditorState {
  return { ...state, validationError: message };
}

function clampToCanvas(v: number, bound: number): number {
  return Math.min(Math.max(v, 0), bound - 1e-6);
}

export function reduce(state: EditorState, action: EditorAction): EditorState {
  switch (action.type) {
    case "add_junction": {
      const [w, h] = state.wireframe.size;
      const j = {
        id: state.wireframe.nextId,
        x: clampToCanvas(action.x, w),
        y: clampToCanvas(action.y, h),
      };
      return withEdit(state, {
        ...state.wireframe,
        junctions: [...state.wireframe.junctions, j],
        nextId: state.wireframe.nextId + 1,
      });
    }
    case "move_junction": {
      const wf = state.wireframe;
      if (!wf.junctions.some((j) => j.id === action.id)) {
        return reject(state, `junction ${action.id} does not exist`);
      }
      const [w, h] = wf.size;
      return withEdit(state, {
        ...wf,
        junctions: wf.junctions.map((j) =>
          j.id === action.id
            ? { ...j, x: clampToCanvas(action.x, w), y: clampToCanvas(action.y, h) }
            : j,
        ),
      });
    }
    case "delete_junction": {
      const wf = state.wireframe;
      if (!wf.junctions.some((j) => j.id === action.id)) {
        return reject(state, `junction ${action.id} does not exist`);
      }
      // cascade: incident segments go with the junction
      const segments = wf.segments.filter((s) => s.a !== action.id && s.b !== action.id);
      const removed = new Set(
        wf.segments.filter((s) => !segments.includes(s)).map((s) => s.id),
      );
      return withEdit(
        state,
        { ...wf, junctions: wf.junctions.filter((j) => j.id !== action.id), segments },
        {
          junctions: state.selection.junctions.filter((id) => id !== action.id),
          segments: state.selection.segments.filter((id) => !removed.has(id)),
        },
      );
    }
    case "add_segment": {
      const wf = state.wireframe;
      if (action.a === action.b) {
        return reject(state, "a segment needs two distinct junctions");
      }
      if (
        !wf.junctions.some((j) => j.id === action.a) ||
        !wf.junctions.some((j) => j.id === action.b)
      ) {
        return reject(state, "segment endpoints must be existing junctions");
      }
      const dup = wf.segments.some(
        (s) =>
          (s.a === action.a && s.b === action.b) || (s.a === action.b && s.b === action.a),
      );
      if (dup) return reject(state, "these junctions are already connected");
      const seg = { id: wf.nextId, a: action.a, b: action.b };
      return withEdit(state, {
        ...wf,
        segments: [...wf.segments, seg],
        nextId: wf.nextId + 1,
      });
    }
    case "delete_segment": {
      const wf = state.wireframe;
      if (!wf.segments.some((s) => s.id === action.id)) {
        return reject(state, `segment ${action.id} does not exist`);
      }
      return withEdit(
        state,
        { ...wf, segments: wf.segments.filter((s) => s.id !== action.id) },
        {
          ...state.selection,
          segments: state.selection.segments.filter((id) => id !== action.id),
        },
      );
    }
    case "select":
      return {
        ...state,
        selection: { junctions: [...action.junctions], segments: [...action.segments] },
      };
    case "undo": {
      const prev = state.undoStack[state.undoStack.length - 1];
      if (!prev) return state;
      return {
        ...state,
        wireframe: prev.wireframe,
        selection: prev.selection,
        undoStack: state.undoStack.slice(0, -1),
        redoStack: [...state.redoStack, snapshot(state)],
        dirty: true,
        validationError: null,
      };
    }
    case "redo": {
      const next = state.redoStack[state.redoStack.length - 1];
      if (!next) return state;
      return {
        ...state,
        wireframe: next.wireframe,
        selection: next.selection,
        redoStack: state.redoStack.slice(0, -1),
        undoStack: [...state.undoStack, snapshot(state)],
        dirty: true,
        validationError: null,
      };
    }
    case "set_guidance":
      return {
        ...state,
        guidance: { kind: "reference", name: action.name, histogram: action.histogram },
        dirty: true,
      };
    case "clear_guidance":
      return { ...state, guidance: { kind: "none" }, dirty: true };
    case "render_succeeded":
      return {
        ...state,
        lastRender: action.result,
        renderHistory: [action.result, ...state.renderHistory].slice(0, RENDER_HISTORY_LIMIT),
        dirty: false,
        serviceError: null,
        validationError: null,
      };
    case "render_failed":
      return action.validation
        ? { ...state, validationError: action.message }
        : { ...state, serviceError: action.message };
    case "clear_errors":
      return { ...state, validationError: null, serviceError: null };
    default:
      return state;
  }
}

/** Optional 4 px grid snapping used by the canvas interaction layer. */
export function snap(value: number, enabled: boolean, grid = 4): number {
  return enabled ? Math.round(value / grid) * grid : value;
}
