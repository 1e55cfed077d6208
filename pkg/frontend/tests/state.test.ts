import { describe, expect, it } from "vitest";

import { applyHint, draftToCriteria, findProperty, setPick, validateDraft } from "../src/state";
import type { DraftQuery, WireSchema } from "../src/types";

const schema: WireSchema = {
  version: "test",
  groups: [
    {
      name: "Ecology",
      polarity: "positive",
      properties: [
        {
          name: "Precipitation",
          qualified: "Ecology.Precipitation",
          kind: "ordinal",
          scale: ["low", "mid", "high"],
          wildcards: [],
        },
        {
          name: "Soil texture",
          qualified: "Ecology.Soil texture",
          kind: "categorical",
          scale: ["Sandy", "Loamy", "Clay"],
          wildcards: [],
        },
        {
          name: "Morphology",
          qualified: "Ecology.Morphology",
          kind: "categorical",
          scale: ["Tree", "Herb", "Any one"],
          wildcards: ["Any one"],
        },
      ],
    },
  ],
};

describe("draftToCriteria", () => {
  it("returns no criteria for an empty draft", () => {
    expect(draftToCriteria(new Map())).toEqual([]);
  });

  it("serializes range, members and wildcard picks", () => {
    let draft: DraftQuery = new Map();
    draft = setPick(draft, "Ecology.Precipitation", { kind: "range", lo: "low", hi: "mid" });
    draft = setPick(draft, "Ecology.Soil texture", { kind: "members", members: ["Loamy"] });
    draft = setPick(draft, "Ecology.Morphology", { kind: "wildcard" });
    expect(draftToCriteria(draft)).toEqual([
      { property: "Ecology.Precipitation", lo: "low", hi: "mid" },
      { property: "Ecology.Soil texture", members: ["Loamy"] },
      { property: "Ecology.Morphology", wildcard: true },
    ]);
  });

  it("clearing a pick removes its criterion", () => {
    let draft: DraftQuery = new Map();
    draft = setPick(draft, "Ecology.Soil texture", { kind: "members", members: ["Loamy"] });
    draft = setPick(draft, "Ecology.Soil texture", null);
    expect(draftToCriteria(draft)).toEqual([]);
  });
});

describe("validateDraft", () => {
  it("accepts a well-formed draft", () => {
    const draft: DraftQuery = new Map([
      ["Ecology.Precipitation", { kind: "range", lo: "low", hi: "high" }],
    ]);
    expect(validateDraft(draft, schema)).toEqual([]);
  });

  it("rejects inverted ranges", () => {
    const draft: DraftQuery = new Map([
      ["Ecology.Precipitation", { kind: "range", lo: "high", hi: "low" }],
    ]);
    expect(validateDraft(draft, schema)).toHaveLength(1);
  });

  it("rejects labels the schema does not define", () => {
    const draft: DraftQuery = new Map([
      ["Ecology.Soil texture", { kind: "members", members: ["Volcanic"] }],
    ]);
    expect(validateDraft(draft, schema)[0]).toContain("Volcanic");
  });

  it("rejects wildcards on properties without a wildcard option", () => {
    const draft: DraftQuery = new Map([["Ecology.Soil texture", { kind: "wildcard" }]]);
    expect(validateDraft(draft, schema)).toHaveLength(1);
  });

  it("rejects empty member sets and unknown properties", () => {
    const draft: DraftQuery = new Map([
      ["Ecology.Soil texture", { kind: "members", members: [] }],
      ["Nope.Nope", { kind: "wildcard" }],
    ]);
    expect(validateDraft(draft, schema)).toHaveLength(2);
  });
});

describe("applyHint", () => {
  it("drops exactly the hinted criterion", () => {
    let draft: DraftQuery = new Map();
    draft = setPick(draft, "Ecology.Precipitation", { kind: "range", lo: "low", hi: "low" });
    draft = setPick(draft, "Ecology.Soil texture", { kind: "members", members: ["Clay"] });
    const relaxed = applyHint(draft, {
      criterion: "Ecology.Precipitation",
      action: "drop",
      resulting_size: 9,
    });
    expect([...relaxed.keys()]).toEqual(["Ecology.Soil texture"]);
    expect(draft.size).toBe(2); // original draft untouched
  });
});

describe("findProperty", () => {
  it("resolves qualified names and misses cleanly", () => {
    expect(findProperty(schema, "Ecology.Morphology")?.wildcards).toEqual(["Any one"]);
    expect(findProperty(schema, "Ecology.Ghost")).toBeNull();
  });
});
