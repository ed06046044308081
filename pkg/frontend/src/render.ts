// Pure HTML-string renderers over the view model; main.ts owns the DOM.

import { HistoryEntry, MaintenanceDoc, SuggestionDoc } from "./api.js";
import { ViewModel, isClickable } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderMetrics(vm: ViewModel): string {
  if (!vm.metrics) {
    return '<section class="metrics"><p>no session yet</p></section>';
  }
  return `<section class="metrics">
  <h2>accuracy <span class="accuracy-value">${vm.metrics.accuracy}</span></h2>
  ${renderSparkline(vm.history)}
</section>`;
}

export function renderSparkline(history: HistoryEntry[]): string {
  if (history.length === 0) return "";
  const values = history.map((h) => h.metrics.accuracy);
  const width = 120;
  const height = 28;
  const step = values.length > 1 ? width / (values.length - 1) : 0;
  const points = values
    .map((v, i) => `${(i * step).toFixed(1)},${(height - v * height).toFixed(1)}`)
    .join(" ");
  return `<svg class="sparkline" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">
  <polyline fill="none" stroke="currentColor" stroke-width="1.5" points="${points}" />
</svg>`;
}

function chip(s: SuggestionDoc, inFlight: string | null): string {
  const label = s.id === inFlight ? "applying" : s.status;
  return `<span class="chip chip-${escapeHtml(label)}">${escapeHtml(label)}</span>`;
}

export function renderSuggestionCard(s: SuggestionDoc, inFlight: string | null): string {
  const clickable = isClickable(s) && s.id !== inFlight;
  const impact =
    s.expected_impact === null ? "" : `<span class="impact">impact ${s.expected_impact}</span>`;
  const proxyBadge = s.proxy ? '<span class="badge badge-proxy">proxy</span>' : "";
  const buttons = `
    <button data-action="apply" data-id="${escapeHtml(s.id)}" ${clickable ? "" : "disabled"}>apply</button>
    <button data-action="dismiss" data-id="${escapeHtml(s.id)}" ${clickable ? "" : "disabled"}>dismiss</button>`;
  const explanation = s.explanation
    .map(
      (t) => `<li>
      <code>${escapeHtml(t.row_id)}</code>
      <span class="tuple-text">${escapeHtml(t.post_text)}</span>
      <span class="tuple-meta">${escapeHtml(t.country)} / ${escapeHtml(t.language)}</span>
      <em>${escapeHtml(t.note)}</em>
    </li>`,
    )
    .join("\n");
  return `<article class="card card-${escapeHtml(s.status)}" data-suggestion="${escapeHtml(s.id)}">
  <header>
    <h3>${escapeHtml(s.title)}</h3>
    ${chip(s, inFlight)} ${proxyBadge}
  </header>
  <p class="numbers">before ${s.accuracy_before ?? "-"} after ${s.accuracy_after ?? "-"} ${impact}</p>
  <ul class="explanation">${explanation}</ul>
  <footer>${buttons}</footer>
</article>`;
}

export function renderMaintenance(maintenance: MaintenanceDoc | null): string {
  if (!maintenance) return '<section class="maintenance"><p>no edits yet</p></section>';
  const { policy } = maintenance;
  const fallback = policy.enabled
    ? '<span class="badge badge-incremental">incremental</span>'
    : `<span class="badge badge-fallback">fallback: ${escapeHtml(policy.fallback_reason ?? "")}</span>`;
  const rows = Object.entries(maintenance.nodes)
    .filter(([, n]) => n.changed + n.inserted + n.deleted > 0 || Object.keys(n.invocations).length > 0)
    .map(
      ([node, n]) => `<tr>
      <td><code>${escapeHtml(node)}</code></td>
      <td>${n.changed}</td><td>${n.inserted}</td><td>${n.deleted}</td>
      <td>${escapeHtml(
        Object.entries(n.invocations)
          .map(([kind, count]) => `${kind}:${count}`)
          .join(" ") || "-",
      )}</td>
    </tr>`,
    )
    .join("\n");
  return `<section class="maintenance">
  <h2>last edit ${fallback}</h2>
  <table>
    <thead><tr><th>node</th><th>changed</th><th>inserted</th><th>deleted</th><th>calls</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>
</section>`;
}

export function renderApp(vm: ViewModel): string {
  const notice = vm.notice ? `<div class="notice">${escapeHtml(vm.notice)}</div>` : "";
  const error = vm.error ? `<div class="error">${escapeHtml(vm.error)}</div>` : "";
  const planError = vm.planError
    ? `<div class="plan-error">${escapeHtml(vm.planError)}</div>`
    : "";
  const cards = vm.suggestions.map((s) => renderSuggestionCard(s, vm.inFlight)).join("\n");
  const polling = vm.polling ? '<span class="polling">analyses running…</span>' : "";
  return `
${notice}
${error}
<main>
  <section class="editor">
    <h2>pipeline plan</h2>
    ${planError}
    <textarea id="plan-text" spellcheck="false">${escapeHtml(vm.planText)}</textarea>
    <button data-action="submit-plan" ${vm.busy ? "disabled" : ""}>update plan</button>
  </section>
  <section class="panel">
    ${renderMetrics(vm)}
    <section class="suggestions">
      <h2>suggestions ${polling}</h2>
      ${cards || "<p>none yet</p>"}
    </section>
    ${renderMaintenance(vm.maintenance)}
  </section>
</main>`;
}
