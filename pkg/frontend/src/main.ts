import { ApiClient } from './api.js';
import { App } from './app.js';

function reviewerId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('reviewer');
  if (fromQuery) {
    localStorage.setItem('bitextqc.reviewer', fromQuery);
    return fromQuery;
  }
  const saved = localStorage.getItem('bitextqc.reviewer');
  if (saved) return saved;
  const generated = `reviewer-${Math.random().toString(36).slice(2, 8)}`;
  localStorage.setItem('bitextqc.reviewer', generated);
  return generated;
}

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app mount point');
}
const app = new App(root, new ApiClient(''), { reviewer: reviewerId() });
void app.start();
