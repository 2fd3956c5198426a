// Ranked alert list. The service pre-orders the queue (score desc, area
// desc, then ids); this panel renders exactly that order and never
// re-sorts client-side, so what the analyst sees is what the ranking
// produced.

import type { Candidate } from './types.js';

export class QueuePanel {
  readonly root: HTMLElement;
  onSelect: (candidate: Candidate) => void = () => {};

  constructor(container: HTMLElement) {
    this.root = document.createElement('ul');
    this.root.className = 'queue-panel';
    container.appendChild(this.root);
  }

  render(candidates: Candidate[], selectedId: string | null): void {
    this.root.replaceChildren();
    if (candidates.length === 0) {
      const empty = document.createElement('li');
      empty.className = 'queue-empty';
      empty.textContent = 'No candidates awaiting review';
      this.root.appendChild(empty);
      return;
    }
    candidates.forEach((cand, rank) => {
      const item = document.createElement('li');
      item.className = 'queue-item' + (cand.id === selectedId ? ' selected' : '');
      item.dataset.candidateId = cand.id;

      const title = document.createElement('span');
      title.className = 'queue-item-id';
      title.textContent = `${rank + 1}. ${cand.id}`;

      const stats = document.createElement('span');
      stats.className = 'queue-item-stats';
      const flux =
        cand.flux_kg_per_hr != null
          ? ` · ${cand.flux_kg_per_hr.toFixed(0)} kg/h`
          : '';
      stats.textContent = `score ${cand.score.toFixed(2)} · ${cand.area_px} px${flux}`;

      item.append(title, stats);
      item.addEventListener('click', () => this.onSelect(cand));
      this.root.appendChild(item);
    });
  }
}
