/** Single-page gallery client for the interactive-evolution service. */
import { ApiError, Client, Gallery } from "./api";
import { GalleryModel, TileState } from "./state";
import { actionRegion, drawFrame, drawSparkline } from "./render";

const model = new GalleryModel();
let client = new Client("http://127.0.0.1:8765");
let voteInFlight = false;
let obsConfig = { obs_h: 64, obs_w: 64, act_h: 32, act_w: 32 };

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function setStatus(text: string, isError = false): void {
  const box = el<HTMLDivElement>("status");
  box.textContent = text;
  box.className = isError ? "status error" : "status";
}

function zoomFor(width: number): number {
  return Math.max(1, Math.floor(256 / width));
}

function buildTile(tile: TileState): HTMLElement {
  const card = document.createElement("div");
  card.className = "tile";
  card.dataset.candidate = tile.candidate;

  const header = document.createElement("div");
  header.className = "tile-header";
  header.textContent = tile.candidate;
  const badge = document.createElement("span");
  badge.className = "badge";
  header.appendChild(badge);
  card.appendChild(header);

  if (tile.decodeError || !tile.frames) {
    const err = document.createElement("div");
    err.className = "decode-error";
    err.textContent = `decode failed: ${tile.decodeError ?? "no frames"}`;
    card.appendChild(err);
    return card;
  }

  const zoom = zoomFor(tile.clip.width);
  const canvas = document.createElement("canvas");
  canvas.width = tile.clip.width * zoom;
  canvas.height = tile.clip.height * zoom;
  canvas.className = "grid-canvas";
  card.appendChild(canvas);

  const spark = document.createElement("canvas");
  spark.width = canvas.width;
  spark.height = 28;
  spark.className = "sparkline";
  const traces = Object.values(tile.clip.rewards);
  if (traces.length > 0) card.appendChild(spark);

  const controls = document.createElement("div");
  controls.className = "controls";
  const playBtn = document.createElement("button");
  playBtn.textContent = "pause";
  playBtn.onclick = (ev) => {
    ev.stopPropagation();
    tile.playing = !tile.playing;
    playBtn.textContent = tile.playing ? "pause" : "play";
  };
  controls.appendChild(playBtn);

  const scrub = document.createElement("input");
  scrub.type = "range";
  scrub.min = "0";
  scrub.max = String(tile.frames.length - 1);
  scrub.value = "0";
  scrub.oninput = (ev) => {
    ev.stopPropagation();
    model.scrub(tile.candidate, Number(scrub.value));
    playBtn.textContent = "play";
  };
  scrub.onclick = (ev) => ev.stopPropagation();
  controls.appendChild(scrub);

  const speed = document.createElement("select");
  for (const s of [1, 2, 4, 8]) {
    const opt = document.createElement("option");
    opt.value = String(s);
    opt.textContent = `${s}x`;
    speed.appendChild(opt);
  }
  speed.onchange = () => { tile.speed = Number(speed.value); };
  speed.onclick = (ev) => ev.stopPropagation();
  controls.appendChild(speed);
  card.appendChild(controls);

  const meta = document.createElement("div");
  meta.className = "meta";
  const mob = tile.clip.mobility;
  meta.textContent = `reward ${tile.clip.total_reward.toFixed(3)}`
    + (mob.mobile ? ` | mobile p${mob.period} (${mob.displacement})` : "");
  card.appendChild(meta);

  card.onclick = () => {
    model.toggleSelect(tile.candidate);
    refreshSelectionBadges();
  };
  return card;
}

function refreshSelectionBadges(): void {
  for (const card of document.querySelectorAll<HTMLElement>(".tile")) {
    const candidate = card.dataset.candidate!;
    const rank = model.rankOf(candidate);
    const badge = card.querySelector<HTMLElement>(".badge");
    if (badge) badge.textContent = rank === null ? "" : `#${rank}`;
    card.classList.toggle("selected", rank !== null);
  }
  el<HTMLButtonElement>("submit").disabled = !model.canSubmit() || voteInFlight;
  el<HTMLSpanElement>("selection-order").textContent =
    model.ranking().join(" > ") || "none";
}

function renderGallery(): void {
  el<HTMLSpanElement>("generation").textContent = String(model.generation);
  el<HTMLSpanElement>("session-id").textContent = model.sessionId;
  const grid = el<HTMLDivElement>("gallery");
  grid.textContent = "";
  for (const tile of model.tiles) {
    grid.appendChild(buildTile(tile));
  }
  refreshSelectionBadges();
}

function paint(): void {
  model.tick();
  for (const card of document.querySelectorAll<HTMLElement>(".tile")) {
    const tile = model.tile(card.dataset.candidate!);
    if (!tile.frames) continue;
    const canvas = card.querySelector<HTMLCanvasElement>(".grid-canvas");
    if (!canvas) continue;
    const ctx = canvas.getContext("2d");
    if (!ctx) continue;
    const zoom = zoomFor(tile.clip.width);
    const region = actionRegion(
      obsConfig.obs_h, obsConfig.obs_w, obsConfig.act_h, obsConfig.act_w);
    drawFrame(ctx, tile.frames[tile.frameIndex], tile.clip.width,
      tile.clip.height, zoom, region);
    const scrub = card.querySelector<HTMLInputElement>("input[type=range]");
    if (scrub && tile.playing) scrub.value = String(tile.frameIndex);
    const spark = card.querySelector<HTMLCanvasElement>(".sparkline");
    const traces = Object.values(tile.clip.rewards);
    if (spark && traces.length > 0) {
      const sctx = spark.getContext("2d");
      if (sctx) drawSparkline(sctx, traces[0], spark.width, spark.height,
        tile.frameIndex);
    }
  }
  requestAnimationFrame(paint);
}

function applyGallery(gallery: Gallery): void {
  model.load(gallery);
  obsConfig = {
    obs_h: gallery.obs_h, obs_w: gallery.obs_w,
    act_h: Math.floor(gallery.obs_h / 2), act_w: Math.floor(gallery.obs_w / 2),
  };
  renderGallery();
}

async function createSession(): Promise<void> {
  client = new Client(el<HTMLInputElement>("base-url").value.trim());
  const config = {
    obs_h: 64, obs_w: 64, act_h: 32, act_w: 32,
    rule: el<HTMLInputElement>("rule").value.trim() || "B3/S23",
    family: "toggle",
    population: Number(el<HTMLInputElement>("population").value) || 8,
    steps: Number(el<HTMLInputElement>("steps").value) || 48,
    seed: Number(el<HTMLInputElement>("seed").value) || 0,
    wrappers: el<HTMLInputElement>("wrappers").value.trim(),
    sigma0: 0.5,
  };
  setStatus("creating session (rollouts may take a moment)...");
  try {
    applyGallery(await client.createSession(config));
    setStatus(`session ${model.sessionId} ready`);
  } catch (err) {
    setStatus(describe(err), true);
  }
}

async function submitRanking(): Promise<void> {
  if (!model.canSubmit() || voteInFlight) return;
  voteInFlight = true;
  refreshSelectionBadges();
  setStatus("submitting ranking and rolling out the next generation...");
  try {
    const next = await client.submitVotes(model.sessionId, model.ranking());
    applyGallery(next);
    setStatus(`generation ${model.generation} ready`);
  } catch (err) {
    // keep the gallery and selection untouched on failure
    setStatus(describe(err), true);
  } finally {
    voteInFlight = false;
    refreshSelectionBadges();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.error}: ${err.message}`;
  return String(err);
}

export function start(): void {
  el<HTMLButtonElement>("create").onclick = () => { void createSession(); };
  el<HTMLButtonElement>("submit").onclick = () => { void submitRanking(); };
  requestAnimationFrame(paint);
  setStatus("no session yet");
}

if (typeof document !== "undefined" && document.getElementById("gallery")) {
  start();
}
