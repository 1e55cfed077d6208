import { beforeEach, describe, expect, it } from "vitest";

import { renderAndBind } from "../src/app";
import type { WireSchema } from "../src/types";

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
          scale: ["Sandy", "Loamy"],
          wildcards: [],
        },
      ],
    },
    {
      name: "Avoid Pests",
      polarity: "negative",
      properties: [
        {
          name: "Insects",
          qualified: "Avoid Pests.Insects",
          kind: "categorical",
          scale: ["Beanfly", "Aphids", "Not relevant"],
          wildcards: ["Not relevant"],
        },
      ],
    },
  ],
};

const allSpecies = ["Alpha bean", "Beta pea", "Gamma vetch"];

/** A fetch stub that emulates just enough of the service for rendering. */
function fakeService(): typeof fetch {
  let nextId = 0;
  return async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = typeof input === "string" ? input : input.toString();
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const json = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), { status, headers: { "Content-Type": "application/json" } });

    if (path === "/sessions") return json({ token: "t", user_id: "u", created_at: "now" });
    if (path === "/schema") return json(schema);
    if (path.startsWith("/species/most-referenced")) return json({ species: [] });
    if (path.startsWith("/species")) {
      return json({ species: allSpecies.map((name) => ({ name, provenance: null, attributes: [] })) });
    }
    if (path === "/select") {
      const body = JSON.parse(String(init?.body ?? "{}"));
      if (body.criteria.some((c: { property: string }) => c.property === "Ecology.Soil texture")) {
        // pretend only the first species tolerates the picked texture
        return json({
          id: `sel${nextId++}`,
          created_at: "now",
          query: { label: null, criteria: body.criteria },
          provenance: null,
          matched: ["Alpha bean"],
          count: 1,
        });
      }
      return json({
        id: `sel${nextId++}`,
        created_at: "now",
        query: { label: null, criteria: body.criteria },
        provenance: null,
        matched: allSpecies,
        count: allSpecies.length,
      });
    }
    if (/\/why\//.test(path)) {
      const species = decodeURIComponent(path.split("/why/")[1]);
      return json({
        species,
        selection: "sel0",
        included: false,
        failures: [
          {
            criterion: "Ecology.Soil texture",
            message: "Not adapted to Ecology.Soil texture",
            species_value: "Sandy",
            requested: "Loamy",
          },
        ],
        hints: [{ criterion: "Ecology.Soil texture", action: "drop", resulting_size: 3 }],
      });
    }
    if (path.startsWith("/suggest/criteria")) return json({ criteria: [] });
    if (path.startsWith("/suggest/species")) return json({ species: [] });
    if (path === "/notes") {
      return json({ code: "UnresolvedTarget", message: "no such target", detail: null }, 400);
    }
    return json({ code: "NotFound", message: `no route ${path}`, detail: null }, 404);
  };
}

describe("renderAndBind", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<main id='app'></main>";
    root = document.getElementById("app") as HTMLElement;
  });

  it("renders one collapsible panel per schema group", async () => {
    await renderAndBind(root, "http://svc", { fetchImpl: fakeService() });
    const panels = root.querySelectorAll("details.group-panel");
    expect(panels).toHaveLength(schema.groups.length);
    expect(panels[1].querySelector("summary")?.textContent).toBe("Avoid Pests (avoid)");
  });

  it("renders controls by property kind, driven only by the schema", async () => {
    await renderAndBind(root, "http://svc", { fetchImpl: fakeService() });
    const ordinal = root.querySelector("[data-property='Ecology.Precipitation']")!;
    expect(ordinal.querySelectorAll("select")).toHaveLength(2); // lo + hi dropdowns
    const labels = Array.from(ordinal.querySelectorAll("select.lo option")).map((o) => o.textContent);
    expect(labels).toEqual(["—", "low", "mid", "high"]);

    const categorical = root.querySelector("[data-property='Ecology.Soil texture']")!;
    const multi = categorical.querySelector("select.members") as HTMLSelectElement;
    expect(multi.multiple).toBe(true);

    // wildcard option appears only where the schema declares one
    expect(categorical.querySelector("label.wildcard")).toBeNull();
    const avoid = root.querySelector("[data-property='Avoid Pests.Insects']")!;
    expect(avoid.querySelector("label.wildcard")?.textContent).toContain("Not relevant");
    // the wildcard label is not duplicated into the member list
    const avoidOptions = Array.from(avoid.querySelectorAll("select.members option")).map((o) => o.value);
    expect(avoidOptions).toEqual(["Beanfly", "Aphids"]);
  });

  it("empty select renders the full species list", async () => {
    const app = await renderAndBind(root, "http://svc", { fetchImpl: fakeService() });
    await app.runSelect();
    const items = Array.from(root.querySelectorAll(".species-list li"));
    expect(items.map((i) => i.textContent)).toEqual(allSpecies);
    expect(items.every((i) => i.className === "included")).toBe(true);
  });

  it("a restrictive pick marks the others excluded and WHY shows failures", async () => {
    const app = await renderAndBind(root, "http://svc", { fetchImpl: fakeService() });
    const multi = root.querySelector(
      "[data-property='Ecology.Soil texture'] select.members",
    ) as HTMLSelectElement;
    multi.options[1].selected = true; // Loamy
    multi.dispatchEvent(new Event("change", { bubbles: true }));
    await app.runSelect();

    const excluded = Array.from(root.querySelectorAll(".species-list li.excluded"));
    expect(excluded.map((i) => i.textContent)).toEqual(["Beta pea", "Gamma vetch"]);

    await app.openWhy("Beta pea");
    const failures = Array.from(root.querySelectorAll(".why-panel li.failure"));
    expect(failures.map((f) => f.textContent)).toEqual(["Not adapted to Ecology.Soil texture"]);
    expect(root.querySelector(".why-panel button.hint")?.textContent).toContain("3 species");
  });

  it("accepting a hint drops the criterion and re-selects", async () => {
    const app = await renderAndBind(root, "http://svc", { fetchImpl: fakeService() });
    const multi = root.querySelector(
      "[data-property='Ecology.Soil texture'] select.members",
    ) as HTMLSelectElement;
    multi.options[0].selected = true;
    multi.dispatchEvent(new Event("change", { bubbles: true }));
    await app.runSelect();
    await app.openWhy("Beta pea");
    await app.acceptHint(0);
    expect(app.state.draft.size).toBe(0);
    expect(app.state.lastSelection?.count).toBe(3);
    // the control was reset to mirror the relaxed draft
    expect(Array.from(multi.selectedOptions)).toHaveLength(0);
  });

  it("client-side validation blocks bad drafts before any request", async () => {
    const app = await renderAndBind(root, "http://svc", { fetchImpl: fakeService() });
    app.state.draft.set("Ecology.Precipitation", { kind: "range", lo: "high", hi: "low" });
    await app.runSelect();
    const slot = root.querySelector(".select-error") as HTMLElement;
    expect(slot.classList.contains("visible")).toBe(true);
    expect(slot.textContent).toContain("lower bound above upper bound");
    expect(app.state.lastSelection).toBeNull();
  });

  it("API errors surface inline next to the originating control", async () => {
    const app = await renderAndBind(root, "http://svc", { fetchImpl: fakeService() });
    await app.submitNote("me", "Ghost", "body");
    const slot = root.querySelector(".note-error") as HTMLElement;
    expect(slot.classList.contains("visible")).toBe(true);
    expect(slot.textContent).toBe("UnresolvedTarget: no such target");
  });
});
