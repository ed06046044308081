// Entry point: wires the controller to the DOM with event delegation.

import { ApiClient } from "./api.js";
import { renderApp } from "./render.js";
import { AppController } from "./state.js";

const root = document.getElementById("app");
const setup = document.getElementById("setup");

if (root && setup) {
  const controller = new AppController(new ApiClient(), {
    onChange: (vm) => {
      const active = document.activeElement;
      // do not clobber the plan editor while the user is typing in it
      if (active && active.id === "plan-text") return;
      root.innerHTML = renderApp(vm);
    },
  });

  setup.addEventListener("submit", (event) => {
    event.preventDefault();
    const planText = (document.getElementById("initial-plan") as HTMLTextAreaElement).value;
    const corpusDir = (document.getElementById("corpus-dir") as HTMLInputElement).value;
    void controller.createSession(planText, corpusDir);
  });

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const action = target.getAttribute("data-action");
    if (!action) return;
    if (action === "apply") {
      void controller.applySuggestion(target.getAttribute("data-id") ?? "");
    } else if (action === "dismiss") {
      void controller.dismissSuggestion(target.getAttribute("data-id") ?? "");
    } else if (action === "submit-plan") {
      const editor = document.getElementById("plan-text") as HTMLTextAreaElement;
      void controller.submitPlan(editor.value);
    }
  });
}
