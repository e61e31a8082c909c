/** Shared test plumbing: mount the real page markup into jsdom. */

import { readFileSync } from 'node:fs';
import { resolve } from 'node:path';

export function mountComposerDom(): void {
  const html = readFileSync(resolve(process.cwd(), 'src/index.html'), 'utf8');
  const match = html.match(/<body>([\s\S]*)<\/body>/);
  if (!match) {
    throw new Error('index.html has no <body>');
  }
  document.body.innerHTML = match[1];
}

export function type(textarea: HTMLTextAreaElement, value: string): void {
  textarea.value = value;
  textarea.dispatchEvent(new Event('input', { bubbles: true }));
}
