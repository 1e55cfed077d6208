import { renderAndBind } from "./app";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "http://127.0.0.1:8571";
const root = document.getElementById("app");
if (root) {
  renderAndBind(root, apiBase).catch((err) => {
    root.textContent = `failed to reach service at ${apiBase}: ${err}`;
  });
}
