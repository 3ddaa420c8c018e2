import { describe, expect, it } from "vitest";

import { canonicalStringify } from "../src/canon.js";

describe("canonicalStringify", () => {
  it("sorts object keys recursively", () => {
    expect(canonicalStringify({ b: 1, a: { d: 2, c: [3, { f: 4, e: 5 }] } })).toBe(
      '{"a":{"c":[3,{"e":5,"f":4}],"d":2},"b":1}',
    );
  });

  it("is insensitive to key insertion order", () => {
    const one = canonicalStringify({ kind: "evaluate", parameters: { measures: ["AP"], rel_threshold: 1 } });
    const two = canonicalStringify({ parameters: { rel_threshold: 1, measures: ["AP"] }, kind: "evaluate" });
    expect(one).toBe(two);
  });

  it("drops undefined values and keeps null", () => {
    expect(canonicalStringify({ a: undefined, b: null })).toBe('{"b":null}');
  });
});
