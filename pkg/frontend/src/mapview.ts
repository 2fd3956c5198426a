// SVG map pane. Renders candidate polygons, redraw replacements, and
// monitoring-site squares as toggleable layers in lon/lat coordinates
// (latitude axis flipped so north is up). Raster overlays (RGB,
// enhancement, probability) are <image> layers pointed at service assets;
// no pixel math happens client-side.

import { fitViewBox, ringBounds, ringsToPath } from './geometry.js';
import type { Candidate, MonitoringSite, OverlayToggles, Ring } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

const LAYER_ORDER = ['rgb', 'enhancement', 'probability', 'candidates', 'sites'] as const;

export class MapView {
  readonly svg: SVGSVGElement;
  private layers: Record<string, SVGGElement> = {};
  private candidates: Candidate[] = [];
  private sites: MonitoringSite[] = [];
  private selectedId: string | null = null;

  constructor(container: HTMLElement) {
    this.svg = document.createElementNS(SVG_NS, 'svg');
    this.svg.setAttribute('class', 'map-view');
    this.svg.setAttribute('viewBox', '-180 -90 360 180');
    this.svg.setAttribute('preserveAspectRatio', 'xMidYMid meet');
    for (const name of LAYER_ORDER) {
      const g = document.createElementNS(SVG_NS, 'g');
      g.dataset.layer = name;
      this.layers[name] = g;
      this.svg.appendChild(g);
    }
    container.appendChild(this.svg);
  }

  setCandidates(candidates: Candidate[]): void {
    this.candidates = candidates;
    this.renderCandidates();
  }

  setSites(sites: MonitoringSite[]): void {
    this.sites = sites;
    this.renderSites();
  }

  setSelected(candidateId: string | null): void {
    this.selectedId = candidateId;
    this.renderCandidates();
  }

  /**
   * Point a raster layer (rgb, enhancement, probability) at a
   * service-provided image covering bbox = [lon0, lat0, lon1, lat1].
   */
  setRaster(
    name: 'rgb' | 'enhancement' | 'probability',
    href: string | null,
    bbox?: [number, number, number, number],
  ): void {
    const layer = this.layers[name]!;
    layer.replaceChildren();
    if (!href || !bbox) return;
    const [x0, y0, x1, y1] = bbox;
    const image = document.createElementNS(SVG_NS, 'image');
    image.setAttribute('href', href);
    image.setAttribute('x', String(x0));
    image.setAttribute('y', String(-y1)); // flipped latitude axis
    image.setAttribute('width', String(x1 - x0));
    image.setAttribute('height', String(y1 - y0));
    image.setAttribute('preserveAspectRatio', 'none');
    layer.appendChild(image);
  }

  /** Show/hide layers only; rendering state is otherwise untouched. */
  applyOverlays(overlays: OverlayToggles): void {
    for (const name of LAYER_ORDER) {
      this.layers[name]!.setAttribute(
        'display',
        overlays[name] ? 'inline' : 'none',
      );
    }
  }

  /** Center the viewport on a polygon (or point) without rescaling wildly. */
  panTo(rings: Ring[]): void {
    const flipped = rings.map((ring) =>
      ring.map(([x, y]) => [x, -y] as [number, number]),
    );
    this.svg.setAttribute('viewBox', fitViewBox(ringBounds(flipped)));
  }

  private polygonPath(rings: Ring[]): string {
    return ringsToPath(
      rings.map((ring) => ring.map(([x, y]) => [x, -y] as [number, number])),
    );
  }

  private renderCandidates(): void {
    const layer = this.layers['candidates']!;
    layer.replaceChildren();
    for (const cand of this.candidates) {
      const path = document.createElementNS(SVG_NS, 'path');
      const rings = cand.replacement_polygon ?? cand.polygon;
      if (!rings.length) continue;
      path.setAttribute('d', this.polygonPath(rings));
      path.setAttribute('fill-rule', 'evenodd');
      path.dataset.candidateId = cand.id;
      path.dataset.reviewState = cand.review_state;
      const classes = ['candidate', cand.review_state];
      if (cand.replacement_polygon) classes.push('redrawn');
      if (cand.id === this.selectedId) classes.push('selected');
      path.setAttribute('class', classes.join(' '));
      layer.appendChild(path);
    }
  }

  private renderSites(): void {
    const layer = this.layers['sites']!;
    layer.replaceChildren();
    for (const site of this.sites) {
      const [x0, y0, x1, y1] = site.square;
      const rect = document.createElementNS(SVG_NS, 'rect');
      rect.setAttribute('x', String(x0));
      rect.setAttribute('y', String(-y1)); // flipped latitude axis
      rect.setAttribute('width', String(x1 - x0));
      rect.setAttribute('height', String(y1 - y0));
      rect.setAttribute('class', 'monitoring-site');
      rect.dataset.siteId = site.site_id;
      layer.appendChild(rect);
    }
  }
}
