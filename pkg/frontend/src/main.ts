import { createPanel } from "./panel.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("service") ?? "http://127.0.0.1:8000";

const root = document.getElementById("app");
if (root) {
    void createPanel(root, { base });
}
