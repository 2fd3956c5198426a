// Top-level wiring: queue panel + map pane + review actions against the
// service. All mutations follow the same discipline: optimistic hide,
// request, reconcile with the server's copy (or roll back / refresh on
// failure). Overlay toggles are presentation-only and never issue requests.

import { ApiError, ConflictError, ReviewApi } from './api.js';
import { PolygonEditor } from './editor.js';
import { ringCentroid } from './geometry.js';
import { MapView } from './mapview.js';
import { QueuePanel } from './queue.js';
import {
  applyOptimistic,
  conflictRefresh,
  loadQueue,
  reconcile,
  rollback,
  selectCandidate,
  setNotice,
  Store,
  toggleOverlay,
} from './state.js';
import type {
  Candidate,
  NotificationItem,
  OverlayName,
  QueueFilters,
  Ring,
} from './types.js';

/** Map a validated-export entry onto the candidate shape the map draws. */
function fromNotification(note: NotificationItem): Candidate {
  return {
    id: note.candidate_id,
    granule_id: note.granule_id,
    score: note.score,
    area_px: 0,
    review_state: 'validated',
    pixels: [],
    polygon: note.polygon,
    flux_kg_per_hr: note.flux_kg_per_hr ?? undefined,
    reviewed_utc: note.validated_utc ?? undefined,
    reviewed_by: note.validated_by ?? undefined,
  };
}

const OVERLAY_LABELS: Record<OverlayName, string> = {
  rgb: 'RGB',
  enhancement: 'Enhancement',
  probability: 'Probability',
  candidates: 'Candidates',
  sites: 'Monitoring sites',
};

export class App {
  readonly store = new Store();
  readonly queuePanel: QueuePanel;
  readonly mapView: MapView;
  readonly editor: PolygonEditor;
  readonly noticeBar: HTMLElement;
  filters: QueueFilters = {};

  // validated candidates stay visible on the map (queue holds proposed
  // only); sourced from the export feed so any session's reviews show
  private validated: Candidate[] = [];
  private buttons: Record<string, HTMLButtonElement> = {};

  constructor(
    root: HTMLElement,
    private readonly api: ReviewApi,
  ) {
    root.classList.add('review-app');

    const toolbar = document.createElement('div');
    toolbar.className = 'toolbar';
    for (const name of Object.keys(OVERLAY_LABELS) as OverlayName[]) {
      toolbar.appendChild(this.overlayToggle(name));
    }
    this.noticeBar = document.createElement('div');
    this.noticeBar.className = 'notice';
    toolbar.appendChild(this.noticeBar);

    const main = document.createElement('div');
    main.className = 'main';
    const queueContainer = document.createElement('div');
    queueContainer.className = 'queue-container';
    const mapContainer = document.createElement('div');
    mapContainer.className = 'map-container';
    main.append(queueContainer, mapContainer);

    const actions = document.createElement('div');
    actions.className = 'actions';
    this.buttons['validate'] = this.actionButton(actions, 'Validate', () =>
      this.validateSelected(),
    );
    this.buttons['redraw'] = this.actionButton(actions, 'Redraw + validate', () =>
      this.beginRedraw(),
    );
    this.buttons['reject'] = this.actionButton(actions, 'Reject', () =>
      this.rejectSelected(),
    );
    this.buttons['bulk'] = this.actionButton(
      actions,
      'Delete remaining proposed',
      () => this.bulkDeleteCurrent(),
    );

    root.append(toolbar, main, actions);

    this.queuePanel = new QueuePanel(queueContainer);
    this.mapView = new MapView(mapContainer);
    this.editor = new PolygonEditor(this.mapView.svg);
    this.queuePanel.onSelect = (cand) => void this.select(cand);

    this.store.subscribe((state) => {
      this.queuePanel.render(state.queue, state.selected?.id ?? null);
      this.mapView.setCandidates([...state.queue, ...this.validated]);
      this.mapView.setSelected(state.selected?.id ?? null);
      this.mapView.applyOverlays(state.overlays);
      this.noticeBar.textContent = state.notice ?? '';
      const hasSelection = state.selected !== null;
      this.buttons['validate']!.disabled = !hasSelection;
      this.buttons['redraw']!.disabled = !hasSelection;
      this.buttons['reject']!.disabled = !hasSelection;
      this.buttons['bulk']!.disabled = state.granuleId === null;
    });
  }

  /** Load the queue, validated overlays, and monitoring sites. */
  async refresh(): Promise<void> {
    const page = await this.api.queue(this.filters);
    let warning: string | null = null;
    try {
      this.validated = (await this.api.exportNotifications()).map(
        fromNotification,
      );
      this.mapView.setSites(await this.api.monitoringSites());
    } catch (error) {
      // overlays are auxiliary; keep the queue usable if they fail
      warning = `overlay data unavailable: ${String(error)}`;
    }
    this.store.update((s) => loadQueue(s, page));
    if (warning) this.store.update((s) => setNotice(s, warning));
  }

  /** Fetch the fresh record, select it, and pan the map to it. */
  async select(candidate: Candidate): Promise<void> {
    const fresh = await this.api.candidate(candidate.id);
    this.store.update((s) => selectCandidate(s, fresh));
    const rings = fresh.replacement_polygon ?? fresh.polygon;
    if (rings.length) {
      this.mapView.panTo(rings);
    }
  }

  async validateSelected(): Promise<void> {
    await this.reviewSelected('validate');
  }

  async rejectSelected(): Promise<void> {
    await this.reviewSelected('reject');
  }

  /** Arm the polygon editor; the review posts when the ring closes. */
  beginRedraw(): Promise<void> {
    const selected = this.store.get().selected;
    if (!selected || this.editor.isActive) return Promise.resolve();
    const rings = selected.replacement_polygon ?? selected.polygon;
    if (rings.length) this.mapView.panTo(rings);
    return new Promise((resolve) => {
      this.editor.onDone = (ring) => {
        void this.submitRedraw(selected, ring).finally(resolve);
      };
      this.editor.start();
    });
  }

  private async submitRedraw(
    selected: Candidate,
    ring: Ring | null,
  ): Promise<void> {
    if (!ring) {
      this.store.update((s) => setNotice(s, 'redraw cancelled'));
      return;
    }
    await this.performReview(selected.id, () =>
      this.api.review(selected.id, 'validate_with_redraw', { polygon: [ring] }),
    );
  }

  async bulkDeleteCurrent(): Promise<void> {
    const granuleId = this.store.get().granuleId;
    if (!granuleId) return;
    try {
      await this.api.bulkDelete(granuleId);
    } catch (error) {
      this.store.update((s) =>
        setNotice(s, `bulk delete failed: ${String(error)}`),
      );
      return;
    }
    // the event may have swept candidates this client never displayed, so
    // re-sync from the server rather than patching locally
    await this.refresh();
    this.store.update((s) =>
      setNotice(s, `deleted remaining proposed candidates of ${granuleId}`),
    );
  }

  centroidOf(candidate: Candidate): [number, number] {
    const rings = candidate.replacement_polygon ?? candidate.polygon;
    return ringCentroid(rings[0] ?? []);
  }

  private async reviewSelected(action: 'validate' | 'reject'): Promise<void> {
    const selected = this.store.get().selected;
    if (!selected) return;
    await this.performReview(selected.id, () =>
      this.api.review(selected.id, action),
    );
  }

  private async performReview(
    candidateId: string,
    send: () => Promise<Candidate>,
  ): Promise<void> {
    this.store.update((s) => applyOptimistic(s, candidateId, 'review'));
    try {
      const server = await send();
      if (server.review_state === 'validated') {
        this.validated = [
          ...this.validated.filter((c) => c.id !== server.id),
          server,
        ];
      }
      this.store.update((s) => reconcile(s, server));
    } catch (error) {
      if (error instanceof ConflictError) {
        const page = await this.api.queue(this.filters);
        this.store.update((s) => conflictRefresh(s, page, candidateId));
      } else {
        this.store.update((s) => rollback(s, candidateId));
        const detail =
          error instanceof ApiError ? error.message : String(error);
        this.store.update((s) => setNotice(s, `review failed: ${detail}`));
      }
    }
  }

  private overlayToggle(name: OverlayName): HTMLElement {
    const label = document.createElement('label');
    label.className = 'overlay-toggle';
    const box = document.createElement('input');
    box.type = 'checkbox';
    box.checked = this.store.get().overlays[name];
    box.dataset.overlay = name;
    box.addEventListener('change', () => {
      this.store.update((s) => toggleOverlay(s, name));
    });
    label.append(box, OVERLAY_LABELS[name]);
    return label;
  }

  private actionButton(
    parent: HTMLElement,
    text: string,
    handler: () => Promise<void>,
  ): HTMLButtonElement {
    const button = document.createElement('button');
    button.textContent = text;
    button.disabled = true;
    button.addEventListener('click', () => void handler());
    parent.appendChild(button);
    return button;
  }
}
