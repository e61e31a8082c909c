/**
 * DOM rendering for the composer.
 *
 * Every numeric string put on screen is the exact decimal form of a
 * PredictResponse field (String(field), also mirrored in data-value);
 * nothing is recomputed or rounded client-side.  Bar widths are the
 * only derived geometry and carry no text.
 */

import type { PredictResponse } from './api.js';
import type { HistoryEntry } from './state.js';

function numberSpan(doc: Document, value: number, className: string): HTMLSpanElement {
  const span = doc.createElement('span');
  span.className = className;
  span.textContent = String(value);
  span.dataset.value = String(value);
  return span;
}

export function renderScore(panel: HTMLElement, resp: PredictResponse): void {
  const doc = panel.ownerDocument;
  panel.hidden = false;

  const scoreEl = panel.querySelector('.score-number') as HTMLElement;
  scoreEl.textContent = String(resp.predicted_abusive_replies);
  scoreEl.dataset.value = String(resp.predicted_abusive_replies);

  const verdictEl = panel.querySelector('.score-verdict') as HTMLElement;
  verdictEl.textContent = resp.verdict_of_draft;
  verdictEl.className = `score-verdict verdict-${resp.verdict_of_draft}`;

  const modelEl = panel.querySelector('.score-model') as HTMLElement;
  modelEl.textContent = `model ${resp.model_id.slice(0, 12)}`;
  modelEl.title = resp.model_id;

  const baseEl = panel.querySelector('.score-base') as HTMLElement;
  baseEl.textContent = '';
  if (resp.attribution_base !== null) {
    baseEl.append('baseline ');
    baseEl.append(numberSpan(doc, resp.attribution_base, 'base-value'));
  } else {
    baseEl.textContent = 'this model kind has no attribution breakdown';
  }

  const list = panel.querySelector('.attribution-list') as HTMLElement;
  list.textContent = '';
  const maxAbs = Math.max(...resp.top_attributions.map((r) => Math.abs(r.attribution)), 0);
  for (const row of resp.top_attributions) {
    const item = doc.createElement('li');
    item.className = 'attribution-row';

    const name = doc.createElement('span');
    name.className = 'attribution-feature';
    name.textContent = row.feature;
    name.title = `standardized value ${String(row.value)}`;

    const bar = doc.createElement('span');
    bar.className = row.attribution >= 0 ? 'attribution-bar pos' : 'attribution-bar neg';
    const width = maxAbs > 0 ? (Math.abs(row.attribution) / maxAbs) * 100 : 0;
    bar.style.width = `${width}%`;

    item.append(name, bar, numberSpan(doc, row.attribution, 'attribution-value'));
    list.append(item);
  }
}

export function clearScore(panel: HTMLElement): void {
  panel.hidden = true;
  (panel.querySelector('.score-number') as HTMLElement).textContent = '';
  (panel.querySelector('.score-verdict') as HTMLElement).textContent = '';
  (panel.querySelector('.score-base') as HTMLElement).textContent = '';
  (panel.querySelector('.attribution-list') as HTMLElement).textContent = '';
}

export interface ComparisonView {
  label: string;
  transformedText: string;
  original: PredictResponse;
  transformed: PredictResponse;
}

/** Append one side-by-side row; returns its apply button for wiring. */
export function appendComparison(tbody: HTMLElement, view: ComparisonView): HTMLButtonElement {
  const doc = tbody.ownerDocument;
  const tr = doc.createElement('tr');
  tr.className = 'comparison-row';

  const label = doc.createElement('td');
  label.textContent = view.label;

  const makeScoreCell = (resp: PredictResponse): HTMLTableCellElement => {
    const td = doc.createElement('td');
    td.append(numberSpan(doc, resp.predicted_abusive_replies, 'comparison-score'));
    const model = doc.createElement('span');
    model.className = 'comparison-model';
    model.textContent = ` (model ${resp.model_id.slice(0, 12)})`;
    model.title = resp.model_id;
    td.append(model);
    return td;
  };

  const action = doc.createElement('td');
  const apply = doc.createElement('button');
  apply.type = 'button';
  apply.className = 'apply-transform';
  apply.textContent = 'Apply to draft';
  action.append(apply);

  tr.append(label, makeScoreCell(view.original), makeScoreCell(view.transformed), action);
  tbody.append(tr);
  return apply;
}

export function renderHistory(
  list: HTMLElement,
  entries: readonly HistoryEntry[],
  onSelect: (entry: HistoryEntry) => void,
): void {
  const doc = list.ownerDocument;
  list.textContent = '';
  for (const entry of entries) {
    const item = doc.createElement('li');
    item.className = 'history-entry';
    item.dataset.seq = String(entry.seq);

    const text = doc.createElement('span');
    text.className = 'history-text';
    const draft = entry.snapshot.draftText;
    text.textContent = draft.length > 60 ? `${draft.slice(0, 57)}…` : draft;

    const score = numberSpan(doc, entry.response.predicted_abusive_replies, 'history-score');
    const model = doc.createElement('span');
    model.className = 'history-model';
    model.textContent = entry.modelId.slice(0, 12);
    model.title = entry.modelId;

    const restore = doc.createElement('button');
    restore.type = 'button';
    restore.className = 'history-restore';
    restore.textContent = 'Restore';
    restore.addEventListener('click', () => onSelect(entry));

    item.append(text, score, model, restore);
    list.append(item);
  }
}

export function setBanner(banner: HTMLElement, message: string | null): void {
  banner.hidden = message === null;
  banner.textContent = message ?? '';
}

export function setValidation(note: HTMLElement, message: string | null): void {
  note.hidden = message === null;
  note.textContent = message ?? '';
}
