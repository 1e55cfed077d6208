import type {
  DraftPick,
  DraftQuery,
  WireCriterion,
  WireHint,
  WireProperty,
  WireSchema,
} from "./types";

/** Look up a property descriptor by its qualified name. */
export function findProperty(schema: WireSchema, qualified: string): WireProperty | null {
  for (const group of schema.groups) {
    for (const prop of group.properties) {
      if (prop.qualified === qualified) return prop;
    }
  }
  return null;
}

/**
 * Validate a draft against the schema snapshot. Returns one message per
 * problem; an empty array means the draft can be submitted. The UI never
 * invents labels, so every pick must come from the property's scale.
 */
export function validateDraft(draft: DraftQuery, schema: WireSchema): string[] {
  const problems: string[] = [];
  for (const [qualified, pick] of draft) {
    const prop = findProperty(schema, qualified);
    if (!prop) {
      problems.push(`unknown property ${qualified}`);
      continue;
    }
    if (pick.kind === "wildcard") {
      if (prop.wildcards.length === 0) {
        problems.push(`${qualified} has no wildcard option`);
      }
    } else if (pick.kind === "range") {
      const lo = prop.scale.indexOf(pick.lo);
      const hi = prop.scale.indexOf(pick.hi);
      if (lo < 0 || hi < 0) {
        problems.push(`${qualified}: label not on the scale`);
      } else if (lo > hi) {
        problems.push(`${qualified}: lower bound above upper bound`);
      }
    } else {
      if (pick.members.length === 0) {
        problems.push(`${qualified}: pick at least one option`);
      }
      for (const label of pick.members) {
        if (!prop.scale.includes(label)) {
          problems.push(`${qualified}: label ${label} not on the scale`);
        }
      }
    }
  }
  return problems;
}

/** Convert the draft into the wire criteria array for POST /select. */
export function draftToCriteria(draft: DraftQuery): WireCriterion[] {
  const criteria: WireCriterion[] = [];
  for (const [property, pick] of draft) {
    if (pick.kind === "wildcard") {
      criteria.push({ property, wildcard: true });
    } else if (pick.kind === "range") {
      criteria.push({ property, lo: pick.lo, hi: pick.hi });
    } else {
      criteria.push({ property, members: pick.members });
    }
  }
  return criteria;
}

/** Apply a relaxation hint (currently always "drop this criterion"). */
export function applyHint(draft: DraftQuery, hint: WireHint): DraftQuery {
  const next: DraftQuery = new Map(draft);
  next.delete(hint.criterion);
  return next;
}

/** Record or clear one property's pick; empty picks remove the entry. */
export function setPick(draft: DraftQuery, qualified: string, pick: DraftPick | null): DraftQuery {
  const next: DraftQuery = new Map(draft);
  if (pick === null) {
    next.delete(qualified);
  } else {
    next.set(qualified, pick);
  }
  return next;
}
