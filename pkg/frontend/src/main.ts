/**
 * Composer wiring: draft edits debounce into /v1/predict calls, the
 * score panel mirrors the latest response, what-if toggles preview
 * transformed drafts side by side, and every scored draft lands in an
 * append-only session history.
 *
 * Request discipline: one debounced request per edit pause, at most one
 * in flight (stale ones aborted), none while the draft is empty or
 * unchanged since the last response.
 */

import { ApiClient, ApiError } from './api.js';
import type { AccountFields, PredictRequest, PredictResponse } from './api.js';
import { Debouncer, SingleFlight, isAbort, DEBOUNCE_MS } from './debounce.js';
import { DraftSession } from './state.js';
import type { HistoryEntry } from './state.js';
import { TRANSFORMS } from './transforms.js';
import {
  appendComparison,
  clearScore,
  renderHistory,
  renderScore,
  setBanner,
  setValidation,
} from './view.js';

export interface ComposerOptions {
  quietMs?: number;
}

export interface ComposerHandle {
  session: DraftSession;
}

interface AccountRead {
  account: AccountFields;
  problem: string | null;
}

const NUMERIC_ACCOUNT_FIELDS = new Set([
  'friends_count', 'followers_count', 'listed_count',
  'favourites_count', 'statuses_count',
]);

function readAccount(form: HTMLElement): AccountRead {
  const account: AccountFields = {};
  const inputs = form.querySelectorAll<HTMLInputElement>('input[data-account]');
  for (const input of inputs) {
    const field = input.dataset.account as keyof AccountFields;
    if (input.type === 'checkbox') {
      if (input.checked) {
        (account as Record<string, boolean>)[field] = true;
      }
      continue;
    }
    const raw = input.value.trim();
    if (raw === '') {
      continue;
    }
    const value = Number(raw);
    if (!Number.isInteger(value) || value < 0) {
      return { account, problem: `${field.replace(/_/g, ' ')} must be a nonnegative integer` };
    }
    if (NUMERIC_ACCOUNT_FIELDS.has(field)) {
      (account as Record<string, number>)[field] = value;
    }
  }
  return { account, problem: null };
}

function writeAccount(form: HTMLElement, account: AccountFields): void {
  const inputs = form.querySelectorAll<HTMLInputElement>('input[data-account]');
  for (const input of inputs) {
    const field = input.dataset.account as keyof AccountFields;
    const value = account[field];
    if (input.type === 'checkbox') {
      input.checked = value === true;
    } else {
      input.value = value === undefined ? '' : String(value);
    }
  }
}

export function initComposer(
  doc: Document,
  api: ApiClient,
  opts: ComposerOptions = {},
): ComposerHandle {
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = doc.getElementById(id);
    if (!el) {
      throw new Error(`composer: missing #${id}`);
    }
    return el as T;
  };

  const draftInput = byId<HTMLTextAreaElement>('draft-input');
  const scorePanel = byId<HTMLElement>('score-panel');
  const validation = byId<HTMLElement>('validation');
  const banner = byId<HTMLElement>('offline-banner');
  const accountForm = byId<HTMLElement>('account-form');
  const whatIfButtons = byId<HTMLElement>('whatif-buttons');
  const comparisonRows = byId<HTMLElement>('comparison-rows');
  const historyList = byId<HTMLElement>('history-list');
  const panelCompose = byId<HTMLElement>('panel-compose');
  const panelHistory = byId<HTMLElement>('panel-history');
  const tabCompose = byId<HTMLElement>('tab-compose');
  const tabHistory = byId<HTMLElement>('tab-history');

  const session = new DraftSession();
  const debouncer = new Debouncer(opts.quietMs ?? DEBOUNCE_MS);
  const flight = new SingleFlight();

  let lastScoredText: string | null = null;
  let lastResponse: PredictResponse | null = null;

  const buildRequest = (text: string): PredictRequest => {
    const req: PredictRequest = { draft_text: text };
    if (Object.keys(session.account).length > 0) {
      req.account = session.account;
    }
    return req;
  };

  const refreshHistory = (): void => {
    renderHistory(historyList, session.entries(), restoreEntry);
  };

  const adopt = (text: string, response: PredictResponse): void => {
    lastScoredText = text;
    lastResponse = response;
    session.record({ draftText: text, account: session.account }, response);
    renderScore(scorePanel, response);
    refreshHistory();
    setBanner(banner, null);
    setValidation(validation, null);
  };

  const scoreDraft = async (text: string): Promise<void> => {
    if (text === lastScoredText && lastResponse) {
      renderScore(scorePanel, lastResponse); // nothing changed; no request
      return;
    }
    try {
      const response = await flight.run((signal) =>
        api.predict(buildRequest(text), signal));
      adopt(text, response);
    } catch (err) {
      if (isAbort(err)) {
        return; // superseded by a newer edit
      }
      if (err instanceof ApiError && err.kind === 'validation') {
        setValidation(validation, err.message);
      } else if (err instanceof ApiError) {
        setBanner(banner, err.kind === 'offline'
          ? 'forecast service unreachable — drafts are not being scored'
          : err.message);
      } else {
        throw err;
      }
    }
  };

  const onEdit = (): void => {
    const text = draftInput.value;
    session.draftText = text;
    if (text.trim() === '') {
      debouncer.cancel();
      flight.abort();
      clearScore(scorePanel);
      setValidation(validation, null);
      return;
    }
    debouncer.schedule(() => {
      void scoreDraft(draftInput.value);
    });
  };

  const restoreEntry = (entry: HistoryEntry): void => {
    debouncer.cancel();
    flight.abort();
    session.restore(entry.seq);
    draftInput.value = entry.snapshot.draftText;
    writeAccount(accountForm, entry.snapshot.account);
    lastScoredText = entry.snapshot.draftText;
    lastResponse = entry.response;
    renderScore(scorePanel, entry.response);
    setValidation(validation, null);
    showPanel('compose');
  };

  const runWhatIf = async (transformId: string): Promise<void> => {
    const transform = TRANSFORMS.find((t) => t.id === transformId);
    if (!transform) {
      return;
    }
    if (lastScoredText === null || lastResponse === null) {
      setValidation(validation, 'score a draft before trying what-if edits');
      return;
    }
    const original = lastResponse;
    const transformedText = transform.apply(lastScoredText);
    if (transformedText.trim() === '') {
      setValidation(validation, `"${transform.label}" empties the draft; nothing to score`);
      return;
    }
    try {
      const transformed = transformedText === lastScoredText
        ? original // no-op transform: same draft, same recorded score
        : await flight.run((signal) =>
            api.predict(buildRequest(transformedText), signal));
      const applyButton = appendComparison(comparisonRows, {
        label: transform.label,
        transformedText,
        original,
        transformed,
      });
      applyButton.addEventListener('click', () => {
        draftInput.value = transformedText;
        session.draftText = transformedText;
        adopt(transformedText, transformed);
      });
      setBanner(banner, null);
    } catch (err) {
      if (isAbort(err)) {
        return;
      }
      if (err instanceof ApiError && err.kind === 'validation') {
        setValidation(validation, err.message);
      } else if (err instanceof ApiError) {
        setBanner(banner, err.message);
      } else {
        throw err;
      }
    }
  };

  const showPanel = (which: 'compose' | 'history'): void => {
    panelCompose.hidden = which !== 'compose';
    panelHistory.hidden = which !== 'history';
    tabCompose.classList.toggle('active', which === 'compose');
    tabHistory.classList.toggle('active', which === 'history');
  };

  draftInput.addEventListener('input', onEdit);

  accountForm.addEventListener('change', () => {
    const { account, problem } = readAccount(accountForm);
    if (problem) {
      setValidation(validation, problem);
      return;
    }
    setValidation(validation, null);
    session.account = account;
    lastScoredText = null; // same text is scorable again under new fields
    if (draftInput.value.trim() !== '') {
      debouncer.schedule(() => {
        void scoreDraft(draftInput.value);
      });
    }
  });

  for (const transform of TRANSFORMS) {
    const button = doc.createElement('button');
    button.type = 'button';
    button.className = 'whatif-button';
    button.dataset.transform = transform.id;
    button.textContent = transform.label;
    button.addEventListener('click', () => {
      void runWhatIf(transform.id);
    });
    whatIfButtons.append(button);
  }

  tabCompose.addEventListener('click', () => showPanel('compose'));
  tabHistory.addEventListener('click', () => showPanel('history'));

  clearScore(scorePanel);
  setBanner(banner, null);
  setValidation(validation, null);
  showPanel('compose');

  return { session };
}
