import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseWireframe, serializeWireframe, SchemaError } from "../src/schema.js";

const fixturePath = fileURLToPath(new URL("../fixtures/wireframes.json", import.meta.url));
const corpus: string[] = JSON.parse(readFileSync(fixturePath, "utf-8")).fixtures;

describe("shared fixture corpus", () => {
  it("has enough cases to be meaningful", () => {
    expect(corpus.length).toBeGreaterThanOrEqual(10);
  });

  it("round-trips every fixture byte-exactly", () => {
    for (const serialized of corpus) {
      const wf = parseWireframe(serialized);
      expect(serializeWireframe(wf)).toBe(serialized);
    }
  });

  it("re-parses its own serialization to equal values", () => {
    for (const serialized of corpus) {
      const wf = parseWireframe(serialized);
      const again = parseWireframe(serializeWireframe(wf));
      expect(again.junctions).toEqual(wf.junctions);
      expect(again.segments).toEqual(wf.segments);
      expect(again.size).toEqual(wf.size);
    }
  });
});

describe("validation", () => {
  it("accepts the minimal annotation", () => {
    const wf = parseWireframe(
      '{"size":[256,256],"junctions":[[0,0],[255,255]],"segments":[[0,1]]}',
    );
    expect(wf.junctions).toHaveLength(2);
    expect(wf.segments).toHaveLength(1);
  });

  it("rejects out-of-range segment indices with the index named", () => {
    expect(() =>
      parseWireframe('{"size":[256,256],"junctions":[[0,0]],"segments":[[0,1]]}'),
    ).toThrowError(/index 1/);
  });

  it("rejects malformed JSON", () => {
    expect(() => parseWireframe("{nope")).toThrowError(SchemaError);
  });

  it("rejects self-loops and duplicates", () => {
    expect(() =>
      parseWireframe('{"size":[8,8],"junctions":[[1,1],[2,2]],"segments":[[1,1]]}'),
    ).toThrowError(/itself/);
    expect(() =>
      parseWireframe(
        '{"size":[8,8],"junctions":[[1,1],[2,2]],"segments":[[0,1],[1,0]]}',
      ),
    ).toThrowError(/duplicate/);
  });

  it("clamps coordinates into the canvas half-open box", () => {
    const wf = parseWireframe(
      '{"size":[16,16],"junctions":[[-3,20],[5,5]],"segments":[[0,1]]}',
    );
    expect(wf.junctions[0].x).toBe(0);
    expect(wf.junctions[0].y).toBeGreaterThanOrEqual(15);
    expect(wf.junctions[0].y).toBeLessThan(16);
  });

  it("requires all three schema keys", () => {
    expect(() => parseWireframe('{"size":[8,8],"junctions":[]}')).toThrowError(/segments/);
  });
});
