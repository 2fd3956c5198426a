// Freehand polygon editor for validate-with-redraw. Click to place
// vertices on the map SVG, click the first vertex (or press Enter) to
// close; Escape cancels. Produces a single closed exterior ring in map
// (lon/lat) coordinates.

import { closeRing } from './geometry.js';
import type { Ring } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

export class PolygonEditor {
  private vertices: Ring = [];
  private group: SVGGElement | null = null;
  private active = false;
  onDone: (ring: Ring | null) => void = () => {};

  constructor(private readonly svg: SVGSVGElement) {}

  get isActive(): boolean {
    return this.active;
  }

  start(): void {
    if (this.active) return;
    this.active = true;
    this.vertices = [];
    this.group = document.createElementNS(SVG_NS, 'g');
    this.group.setAttribute('class', 'polygon-editor');
    this.svg.appendChild(this.group);
    this.svg.addEventListener('click', this.handleClick);
    document.addEventListener('keydown', this.handleKey);
  }

  /** Add a vertex in map coordinates (latitude un-flipped by the caller). */
  addVertex(lon: number, lat: number): void {
    if (!this.active) return;
    this.vertices.push([lon, lat]);
    this.redraw();
  }

  finish(): void {
    const ring = this.vertices.length >= 3 ? closeRing(this.vertices) : null;
    this.teardown();
    this.onDone(ring);
  }

  cancel(): void {
    this.teardown();
    this.onDone(null);
  }

  private handleClick = (event: MouseEvent): void => {
    const point = this.toMapCoords(event);
    if (!point) return;
    // closing click: near the first vertex once a ring is plausible
    if (this.vertices.length >= 3) {
      const [fx, fy] = this.vertices[0]!;
      if (Math.hypot(point[0] - fx, point[1] - fy) < this.closeDistance()) {
        this.finish();
        return;
      }
    }
    this.addVertex(point[0], point[1]);
  };

  private handleKey = (event: KeyboardEvent): void => {
    if (event.key === 'Enter') this.finish();
    else if (event.key === 'Escape') this.cancel();
  };

  private toMapCoords(event: MouseEvent): [number, number] | null {
    const rect = this.svg.getBoundingClientRect();
    if (rect.width === 0 || rect.height === 0) return null;
    const viewBox = this.svg.getAttribute('viewBox');
    if (!viewBox) return null;
    const [vx, vy, vw, vh] = viewBox.split(' ').map(Number) as [
      number, number, number, number,
    ];
    const x = vx + ((event.clientX - rect.left) / rect.width) * vw;
    const y = vy + ((event.clientY - rect.top) / rect.height) * vh;
    return [x, -y]; // the map pane stores latitude flipped
  }

  private closeDistance(): number {
    const viewBox = this.svg.getAttribute('viewBox');
    if (!viewBox) return 0.001;
    const vw = Number(viewBox.split(' ')[2]);
    return vw * 0.03;
  }

  private redraw(): void {
    if (!this.group) return;
    this.group.replaceChildren();
    if (this.vertices.length > 1) {
      const line = document.createElementNS(SVG_NS, 'polyline');
      line.setAttribute(
        'points',
        this.vertices.map(([x, y]) => `${x},${-y}`).join(' '),
      );
      line.setAttribute('class', 'editor-outline');
      this.group.appendChild(line);
    }
    for (const [x, y] of this.vertices) {
      const dot = document.createElementNS(SVG_NS, 'circle');
      dot.setAttribute('cx', String(x));
      dot.setAttribute('cy', String(-y));
      dot.setAttribute('r', '0.002');
      dot.setAttribute('class', 'editor-vertex');
      this.group.appendChild(dot);
    }
  }

  private teardown(): void {
    this.active = false;
    this.svg.removeEventListener('click', this.handleClick);
    document.removeEventListener('keydown', this.handleKey);
    this.group?.remove();
    this.group = null;
    this.vertices = [];
  }
}
