import { ApiClient, ApiError } from "./api";
import { applyHint, draftToCriteria, setPick, validateDraft } from "./state";
import type {
  DraftPick,
  DraftQuery,
  WireExplanation,
  WireProperty,
  WireSchema,
  WireSelection,
} from "./types";

/** Everything the running app knows; tests introspect this directly. */
export interface UiState {
  schema: WireSchema;
  draft: DraftQuery;
  lastSelection: WireSelection | null;
  whyTarget: string | null;
  lastExplanation: WireExplanation | null;
  allSpecies: string[];
}

export interface App {
  state: UiState;
  root: HTMLElement;
  /** Post the current draft and re-render the matched list. */
  runSelect(): Promise<void>;
  /** Open the WHY panel for one species of the last selection. */
  openWhy(species: string): Promise<void>;
  /** Accept a relaxation hint: update the draft and re-select. */
  acceptHint(index: number): Promise<void>;
  refreshSuggestions(): Promise<void>;
  submitNote(author: string, target: string, body: string): Promise<void>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Show an API error inline next to the control that caused it. */
function showError(slot: HTMLElement, err: unknown): void {
  const message = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
  slot.textContent = message;
  slot.classList.add("visible");
}

function clearError(slot: HTMLElement): void {
  slot.textContent = "";
  slot.classList.remove("visible");
}

function option(doc: Document, value: string, label = value): HTMLOptionElement {
  const node = doc.createElement("option");
  node.value = value;
  node.textContent = label;
  return node;
}

/**
 * Build the interactive app inside `root` and wire it to the service at
 * `apiBaseUrl`. Rendering is entirely schema-driven: every control comes
 * from GET /schema, and every displayed list comes from an API response.
 */
export async function renderAndBind(
  root: HTMLElement,
  apiBaseUrl: string,
  options: { userId?: string; fetchImpl?: typeof fetch } = {},
): Promise<App> {
  const doc = root.ownerDocument;
  const api = new ApiClient(apiBaseUrl, options.fetchImpl ?? fetch.bind(globalThis));
  await api.openSession(options.userId ?? "anonymous");
  const schema = await api.getSchema();
  const views = await api.listSpecies();

  const state: UiState = {
    schema,
    draft: new Map(),
    lastSelection: null,
    whyTarget: null,
    lastExplanation: null,
    allSpecies: views.species.map((v) => v.name),
  };

  root.innerHTML = "";
  const criteriaColumn = el(doc, "section", "criteria");
  const resultsColumn = el(doc, "section", "results");
  const sidebar = el(doc, "aside", "sidebar");
  root.append(criteriaColumn, resultsColumn, sidebar);

  // --- criteria panels -------------------------------------------------
  // Hints can drop criteria behind the controls' back, so every control
  // registers a sync callback that re-reads the draft.
  const syncRegistry: Array<() => void> = [];
  const syncControls = () => syncRegistry.forEach((fn) => fn());
  const selectError = el(doc, "p", "error select-error");
  for (const group of schema.groups) {
    const panel = el(doc, "details", "group-panel");
    panel.open = true;
    const summary = el(doc, "summary", undefined, group.name);
    if (group.polarity === "negative") summary.textContent += " (avoid)";
    panel.append(summary);
    for (const prop of group.properties) {
      panel.append(buildPropertyControl(doc, prop));
    }
    criteriaColumn.append(panel);
  }
  const selectButton = el(doc, "button", "run-select", "Select");
  selectButton.addEventListener("click", () => void app.runSelect());
  criteriaColumn.append(selectButton, selectError);

  function buildPropertyControl(doc: Document, prop: WireProperty): HTMLElement {
    const row = el(doc, "div", "property");
    row.dataset.property = prop.qualified;
    row.append(el(doc, "label", undefined, prop.name));
    const plain = prop.scale.filter((s) => !prop.wildcards.includes(s));

    const update = (pick: DraftPick | null) => {
      state.draft = setPick(state.draft, prop.qualified, pick);
    };

    let readPick: () => DraftPick | null;
    if (prop.kind === "ordinal") {
      // Two dropdowns over the labeled scale; blank = no constraint.
      const lo = el(doc, "select", "lo");
      const hi = el(doc, "select", "hi");
      for (const box of [lo, hi]) {
        box.append(option(doc, "", "—"));
        for (const label of plain) box.append(option(doc, label));
      }
      readPick = () => {
        if (!lo.value && !hi.value) return null;
        return {
          kind: "range",
          lo: lo.value || plain[0],
          hi: hi.value || plain[plain.length - 1],
        };
      };
      row.append(lo, hi);
    } else {
      const box = el(doc, "select", "members");
      box.multiple = true;
      for (const label of plain) box.append(option(doc, label));
      readPick = () => {
        const members = Array.from(box.selectedOptions).map((o) => o.value);
        return members.length ? { kind: "members", members } : null;
      };
      row.append(box);
    }

    let wildcardBox: HTMLInputElement | null = null;
    if (prop.wildcards.length > 0) {
      const wrap = el(doc, "label", "wildcard");
      wildcardBox = doc.createElement("input");
      wildcardBox.type = "checkbox";
      wrap.append(wildcardBox, doc.createTextNode(prop.wildcards.join(" / ")));
      row.append(wrap);
    }

    const onChange = () => {
      if (wildcardBox?.checked) {
        update({ kind: "wildcard" });
      } else {
        update(readPick());
      }
      syncFromDraft();
    };
    row.addEventListener("change", onChange);

    const syncFromDraft = () => {
      const pick = state.draft.get(prop.qualified) ?? null;
      if (wildcardBox) wildcardBox.checked = pick?.kind === "wildcard";
      const selects = row.querySelectorAll("select");
      if (pick === null) {
        selects.forEach((s) => {
          if (s.multiple) {
            Array.from(s.options).forEach((o) => (o.selected = false));
          } else {
            s.value = "";
          }
        });
      } else if (pick.kind === "range") {
        (row.querySelector("select.lo") as HTMLSelectElement).value = pick.lo;
        (row.querySelector("select.hi") as HTMLSelectElement).value = pick.hi;
      } else if (pick.kind === "members") {
        const box = row.querySelector("select.members") as HTMLSelectElement;
        Array.from(box.options).forEach((o) => (o.selected = pick.members.includes(o.value)));
      }
    };
    syncRegistry.push(syncFromDraft);
    return row;
  }

  // --- results ---------------------------------------------------------
  const matchedHeading = el(doc, "h2", "matched-heading", "Species");
  const speciesList = el(doc, "ul", "species-list");
  const whyPanel = el(doc, "div", "why-panel");
  const whyError = el(doc, "p", "error why-error");
  resultsColumn.append(matchedHeading, speciesList, whyPanel, whyError);

  function renderSpeciesList(): void {
    speciesList.innerHTML = "";
    const matched = new Set(state.lastSelection?.matched ?? state.allSpecies);
    for (const name of state.allSpecies) {
      const item = el(doc, "li", matched.has(name) ? "included" : "excluded", name);
      if (!matched.has(name)) {
        item.addEventListener("click", () => void app.openWhy(name));
      }
      speciesList.append(item);
    }
    const count = state.lastSelection ? state.lastSelection.count : state.allSpecies.length;
    matchedHeading.textContent = `Species (${count} matched)`;
  }

  function renderWhyPanel(): void {
    whyPanel.innerHTML = "";
    const explanation = state.lastExplanation;
    if (!explanation) return;
    whyPanel.append(el(doc, "h3", undefined, explanation.species));
    const failures = el(doc, "ul", "failures");
    for (const failure of explanation.failures) {
      failures.append(el(doc, "li", "failure", failure.message));
    }
    whyPanel.append(failures);
    explanation.hints.forEach((hint, index) => {
      const button = el(
        doc,
        "button",
        "hint",
        `Drop ${hint.criterion} → ${hint.resulting_size} species`,
      );
      button.addEventListener("click", () => void app.acceptHint(index));
      whyPanel.append(button);
    });
  }

  // --- sidebar ---------------------------------------------------------
  const suggestionError = el(doc, "p", "error suggestion-error");
  const criteriaSuggestions = el(doc, "ul", "suggested-criteria");
  const speciesSuggestions = el(doc, "ul", "suggested-species");
  const referencedSelect = el(doc, "select", "most-referenced");
  const refreshButton = el(doc, "button", "refresh-suggestions", "Refresh suggestions");
  refreshButton.addEventListener("click", () => void app.refreshSuggestions());
  sidebar.append(
    el(doc, "h2", undefined, "Suggestions"),
    refreshButton,
    criteriaSuggestions,
    speciesSuggestions,
    referencedSelect,
    suggestionError,
  );

  // --- note form -------------------------------------------------------
  const noteForm = el(doc, "form", "note-form");
  const noteAuthor = doc.createElement("input");
  noteAuthor.name = "author";
  const noteTarget = doc.createElement("input");
  noteTarget.name = "target";
  const noteBody = doc.createElement("textarea");
  noteBody.name = "body";
  const noteSubmit = el(doc, "button", "note-submit", "Add note");
  noteSubmit.type = "submit";
  const noteError = el(doc, "p", "error note-error");
  const noteOk = el(doc, "p", "note-ok");
  noteForm.append(noteAuthor, noteTarget, noteBody, noteSubmit, noteError, noteOk);
  noteForm.addEventListener("submit", (event) => {
    event.preventDefault();
    void app.submitNote(noteAuthor.value, noteTarget.value, noteBody.value);
  });
  sidebar.append(el(doc, "h2", undefined, "Field note"), noteForm);

  const app: App = {
    state,
    root,
    async runSelect() {
      clearError(selectError);
      const problems = validateDraft(state.draft, state.schema);
      if (problems.length > 0) {
        showError(selectError, new ApiError("Validation", problems.join("; ")));
        return;
      }
      try {
        state.lastSelection = await api.select(draftToCriteria(state.draft));
        state.lastExplanation = null;
        state.whyTarget = null;
        renderSpeciesList();
        renderWhyPanel();
      } catch (err) {
        showError(selectError, err);
      }
    },
    async openWhy(species) {
      if (!state.lastSelection) return;
      clearError(whyError);
      try {
        state.whyTarget = species;
        state.lastExplanation = await api.why(state.lastSelection.id, species);
        renderWhyPanel();
      } catch (err) {
        showError(whyError, err);
      }
    },
    async acceptHint(index) {
      const hint = state.lastExplanation?.hints[index];
      if (!hint) return;
      state.draft = applyHint(state.draft, hint);
      syncControls();
      await this.runSelect();
    },
    async refreshSuggestions() {
      clearError(suggestionError);
      try {
        const [criteria, species, ranked] = await Promise.all([
          api.suggestCriteria(),
          api.suggestSpecies(),
          api.mostReferenced(),
        ]);
        criteriaSuggestions.innerHTML = "";
        for (const c of criteria.criteria) {
          const text =
            "wildcard" in c ? `${c.property}: any` :
            "members" in c ? `${c.property}: ${c.members.join(", ")}` :
            `${c.property}: ${c.lo} .. ${c.hi}`;
          criteriaSuggestions.append(el(doc, "li", undefined, text));
        }
        speciesSuggestions.innerHTML = "";
        for (const name of species.species) {
          speciesSuggestions.append(el(doc, "li", undefined, name));
        }
        referencedSelect.innerHTML = "";
        for (const row of ranked.species) {
          referencedSelect.append(option(doc, row.species, `${row.species} (${row.count})`));
        }
      } catch (err) {
        showError(suggestionError, err);
      }
    },
    async submitNote(author, target, body) {
      clearError(noteError);
      noteOk.textContent = "";
      try {
        await api.postNote(author, target, body);
        noteOk.textContent = "note saved";
      } catch (err) {
        showError(noteError, err);
      }
    },
  };

  renderSpeciesList();
  return app;
}
