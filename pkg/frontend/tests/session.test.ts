// Scripted review session against a live service on the bundled fixture:
// accept one sample, reject one with failure mode homography_drift, flag one,
// then check /api/stats and the decision log.

import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { initApp, type ReviewApp } from '../src/app.js';

const PYTHON = process.env.PYTHON ?? 'python3';
const PORT = 18_435 + (process.pid % 1_000);
const BASE = `http://127.0.0.1:${PORT}`;

let fixtureDir: string;
let server: ChildProcess | undefined;
let app: ReviewApp | undefined;

async function waitFor(
  condition: () => Promise<boolean> | boolean,
  what: string,
  timeoutMs = 30_000,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      if (await condition()) return;
    } catch {
      // not ready yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error(`timed out waiting for ${what}`);
}

async function stats(): Promise<Record<string, Record<string, number>>> {
  const response = await fetch(`${BASE}/api/stats`);
  if (!response.ok) throw new Error(`stats ${response.status}`);
  return (await response.json()) as Record<string, Record<string, number>>;
}

function press(key: string): void {
  document.dispatchEvent(new KeyboardEvent('keydown', { key }));
}

beforeAll(async () => {
  fixtureDir = mkdtempSync(join(tmpdir(), 'afforda-ui-'));
  execFileSync(PYTHON, ['-m', 'afforda.fixtures', fixtureDir], {
    stdio: 'pipe',
  });
  server = spawn(
    PYTHON,
    [
      '-m',
      'afforda.cli',
      'review-serve',
      '--manifest',
      join(fixtureDir, 'manifest.jsonl'),
      '--decisions',
      join(fixtureDir, 'decisions.jsonl'),
      '--annotations',
      join(fixtureDir, 'annotations'),
      '--port',
      String(PORT),
    ],
    { stdio: 'pipe' },
  );
  await waitFor(async () => {
    await stats();
    return true;
  }, 'review service startup');
});

afterAll(() => {
  app?.dispose();
  server?.kill();
  rmSync(fixtureDir, { recursive: true, force: true });
});

describe('scripted review session', () => {
  it('accepts, rejects with homography_drift, and flags via keyboard', async () => {
    const root = document.createElement('div');
    document.body.appendChild(root);
    app = initApp(root, { baseUrl: BASE, fetchFn: fetch });
    app.setReviewer('session-bot');
    await app.start();
    await waitFor(() => app!.state.items.length === 3, 'queue to load');
    expect(app!.state.currentId).toBe('s1');
    expect(root.textContent).toContain('open the drawer');
    expect(root.textContent).toContain('[leftward]');

    // provenance panel mirrors the annotation log
    const provenanceLog = readFileSync(
      join(fixtureDir, 'annotations', 'provenance.jsonl'),
      'utf-8',
    )
      .split('\n')
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as { sample_id: string; dropped: number });
    const s1 = provenanceLog.find((r) => r.sample_id === 's1')!;
    expect(app!.detail?.provenance?.dropped).toBe(s1.dropped);
    expect(root.textContent).toContain('dropped');

    press('a'); // accept s1
    await waitFor(async () => (await stats()).status.accepted === 1,
      's1 accepted');
    await waitFor(() => app!.state.currentId === 's2', 'advance to s2');

    press('r'); // open the failure-mode picker
    await waitFor(() => root.textContent!.includes('homography_drift'),
      'failure-mode picker');
    press('4'); // homography_drift
    await waitFor(async () => (await stats()).status.rejected === 1,
      's2 rejected');
    await waitFor(() => app!.state.currentId === 's3', 'advance to s3');

    press('f'); // flag s3
    await waitFor(async () => (await stats()).status.flagged === 1,
      's3 flagged');

    const finalStats = await stats();
    expect(finalStats.status).toEqual({
      pending: 0,
      accepted: 1,
      rejected: 1,
      flagged: 1,
    });
    expect(finalStats.failure_modes.homography_drift).toBe(1);

    const log = readFileSync(join(fixtureDir, 'decisions.jsonl'), 'utf-8')
      .split('\n')
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as Record<string, unknown>);
    expect(log).toHaveLength(3);
    expect(log.map((record) => [record.sample_id, record.verdict])).toEqual([
      ['s1', 'accept'],
      ['s2', 'reject'],
      ['s3', 'flag'],
    ]);
    expect(log[1].failure_mode).toBe('homography_drift');
    expect(log.every((record) => record.reviewer === 'session-bot')).toBe(true);
  });

  it('blocks reject without a failure mode client-side', async () => {
    expect(app).toBeDefined();
    const before = await stats();
    press('r');
    expect(app!.state.hint).toMatch(/failure mode/);
    press('Escape');
    expect(app!.state.draft.verdict).toBeNull();
    expect(await stats()).toEqual(before); // nothing was posted
  });

  it('keeps a stale view with a banner when the service goes away', async () => {
    server?.kill();
    await new Promise((resolve) => setTimeout(resolve, 300));
    const itemsBefore = app!.state.items.length;
    await app!.refreshQueue();
    expect(app!.state.banner).toBeTruthy();
    expect(app!.state.items.length).toBe(itemsBefore); // stale view retained
  });
});
