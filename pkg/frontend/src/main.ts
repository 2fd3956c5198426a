// Browser entry point. The bundle is served by the review API process
// (serve --ui), so the API base defaults to same-origin; ?api= and
// ?token= query parameters override for local development.

import { ReviewApi } from './api.js';
import { App } from './app.js';

const params = new URLSearchParams(window.location.search);
const base = params.get('api') ?? '';
const token = params.get('token') ?? undefined;

const mount = document.getElementById('app');
if (!mount) throw new Error('missing #app mount point');

const app = new App(mount, new ReviewApi(base, token));
void app.refresh();

// handy for poking at the running app from the devtools console
declare global {
  interface Window {
    plumeReview: App;
  }
}
window.plumeReview = app;
