/**
 * Session state: the draft being composed and the append-only history
 * of every (snapshot, response) pair scored so far.
 */

import type { AccountFields, PredictResponse } from './api.js';

export interface DraftSnapshot {
  draftText: string;
  account: AccountFields;
}

export interface HistoryEntry {
  snapshot: DraftSnapshot;
  response: PredictResponse;
  /** Identity of the artifact that produced the score. */
  modelId: string;
  /** 1-based position in the session, stable across renders. */
  seq: number;
}

export class DraftSession {
  draftText = '';
  account: AccountFields = {};

  private readonly history: HistoryEntry[] = [];

  /** Append a scored snapshot. History only ever grows. */
  record(snapshot: DraftSnapshot, response: PredictResponse): HistoryEntry {
    const entry: HistoryEntry = {
      snapshot: {
        draftText: snapshot.draftText,
        account: { ...snapshot.account },
      },
      response,
      modelId: response.model_id,
      seq: this.history.length + 1,
    };
    this.history.push(entry);
    return entry;
  }

  entries(): readonly HistoryEntry[] {
    return this.history;
  }

  /** Load a past snapshot back into the composer and return its entry. */
  restore(seq: number): HistoryEntry {
    const entry = this.history.find((e) => e.seq === seq);
    if (!entry) {
      throw new Error(`no history entry ${seq}`);
    }
    this.draftText = entry.snapshot.draftText;
    this.account = { ...entry.snapshot.account };
    return entry;
  }
}
