/**
 * What-if edits the composer can preview before the user commits.
 *
 * Each transform is a pure text rewrite; scoring the result still goes
 * through the service.  The abusive-term list here is a best-effort
 * client-side subset for the rewrite only — the server stays the
 * authority on what actually counts as abusive.
 */

export interface WhatIfTransform {
  id: string;
  label: string;
  apply(text: string): string;
}

const ABUSIVE_TERMS = new Set([
  'idiot', 'idiots', 'moron', 'morons', 'moronic', 'loser', 'losers',
  'stupid', 'stupidity', 'dumb', 'dumbest', 'pathetic', 'trash',
  'garbage', 'clown', 'clowns', 'fool', 'fools', 'foolish', 'jerk',
  'scum', 'scumbag', 'creep', 'creepy', 'disgusting', 'worthless',
  'useless', 'nasty', 'vile', 'awful', 'terrible', 'horrible',
]);

function dropTokens(text: string, drop: (token: string) => boolean): string {
  return text
    .split(/\s+/)
    .filter((token) => token.length > 0 && !drop(token))
    .join(' ');
}

/** Lowercased token with wrapping punctuation removed, for list lookup. */
function bareWord(token: string): string {
  return token.toLowerCase().replace(/^[^a-z0-9]+|[^a-z0-9]+$/g, '');
}

export const stripHashtags: WhatIfTransform = {
  id: 'strip-hashtags',
  label: 'Strip hashtags',
  apply: (text) => dropTokens(text, (t) => t.startsWith('#') && t.length > 1),
};

export const stripMentions: WhatIfTransform = {
  id: 'strip-mentions',
  label: 'Strip mentions',
  apply: (text) => dropTokens(text, (t) => t.startsWith('@') && t.length > 1),
};

export const stripAbusiveTerms: WhatIfTransform = {
  id: 'strip-abusive-terms',
  label: 'Strip abusive terms',
  apply: (text) => dropTokens(text, (t) => ABUSIVE_TERMS.has(bareWord(t))),
};

export const TRANSFORMS: readonly WhatIfTransform[] = [
  stripHashtags,
  stripMentions,
  stripAbusiveTerms,
];
