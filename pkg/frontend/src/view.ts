/** DOM adapter: paints a ViewState onto the page skeleton in index.html. */

import { ViewState } from "./session.js";

export interface PageElements {
  cube: HTMLElement;
  status: HTMLElement;
  trialLabel: HTMLElement;
  feedback: HTMLElement;
  summaryPanel: HTMLElement;
  connection: HTMLElement;
}

export function bindPage(doc: Document): PageElements {
  const get = (id: string) => {
    const el = doc.getElementById(id);
    if (!el) {
      throw new Error(`missing page element #${id}`);
    }
    return el;
  };
  return {
    cube: get("cube"),
    status: get("status"),
    trialLabel: get("trial-label"),
    feedback: get("feedback"),
    summaryPanel: get("summary"),
    connection: get("connection"),
  };
}

export function paint(els: PageElements, view: ViewState): void {
  els.cube.className = `cube ${view.cube}`;
  els.status.textContent = view.status;
  els.trialLabel.textContent = view.trialLabel;
  els.feedback.textContent = view.feedback;
  if (view.summary) {
    const s = view.summary;
    els.summaryPanel.hidden = false;
    els.summaryPanel.innerHTML = `
      <h2>Session complete</h2>
      <p>congruent mean: <b>${s.mean_rt_congruent_ms.toFixed(1)} ms</b>
         (accuracy ${(100 * s.accuracy_congruent).toFixed(0)}%)</p>
      <p>incongruent mean: <b>${s.mean_rt_incongruent_ms.toFixed(1)} ms</b>
         (accuracy ${(100 * s.accuracy_incongruent).toFixed(0)}%)</p>
      <p class="delta">difference: <b id="delta-ms">${s.stroop_delta_ms.toFixed(1)}</b> ms</p>`;
  } else {
    els.summaryPanel.hidden = true;
  }
}

export function setConnection(els: PageElements, text: string): void {
  els.connection.textContent = text;
}
