/** JSON shapes exchanged with the service. Labels are always option
 * labels from the schema, never numeric indices. */

export interface WireProperty {
  name: string;
  qualified: string;
  kind: "ordinal" | "categorical";
  scale: string[];
  wildcards: string[];
}

export interface WireGroup {
  name: string;
  polarity: "positive" | "negative";
  properties: WireProperty[];
}

export interface WireSchema {
  version: string;
  groups: WireGroup[];
}

export type WireCriterion =
  | { property: string; wildcard: true }
  | { property: string; lo: string; hi: string }
  | { property: string; members: string[] };

export interface WireQuery {
  label?: string | null;
  criteria: WireCriterion[];
}

export interface WireSelection {
  id: string;
  created_at: string;
  query: { label: string | null; criteria: WireCriterion[] };
  provenance: { op: string; operands: string[] } | null;
  matched: string[];
  count: number;
}

export interface WireFailure {
  criterion: string;
  message: string;
  species_value: string | null;
  requested: string;
}

export interface WireHint {
  criterion: string;
  action: "drop";
  resulting_size: number;
}

export interface WireExplanation {
  species: string;
  selection: string;
  included: boolean;
  failures: WireFailure[];
  hints: WireHint[];
}

export interface WireSpeciesView {
  name: string;
  provenance: string | null;
  attributes: { property: string; value: string }[];
}

export interface WireRanked {
  species: string;
  count: number;
}

export interface WireError {
  code: string;
  message: string;
  detail: string | null;
}

/** One property's draft pick, before it becomes a wire criterion. */
export type DraftPick =
  | { kind: "wildcard" }
  | { kind: "range"; lo: string; hi: string }
  | { kind: "members"; members: string[] };

export type DraftQuery = Map<string, DraftPick>;
