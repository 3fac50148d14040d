/**
 * Gallery model: decoded clips, per-tile playback state, and the ranking
 * selection.  The ranking posted to the server is exactly the order the
 * user clicked candidates in; the UI never mutates clip data.
 */
import { Clip, Gallery } from "./api";
import { decodeClipFrames } from "./decode";

export interface TileState {
  candidate: string;
  clip: Clip;
  frames: Uint8Array[] | null;   // null when decoding failed
  decodeError: string | null;
  frameIndex: number;
  playing: boolean;
  speed: number;                 // frames advanced per tick
}

export class GalleryModel {
  tiles: TileState[] = [];
  selection: string[] = [];      // candidate ids in click order, best first
  generation = 0;
  sessionId = "";
  status = "";

  load(gallery: Gallery): void {
    this.sessionId = gallery.id;
    this.generation = gallery.generation;
    this.status = gallery.status;
    this.selection = [];
    this.tiles = gallery.clips.map((clip) => {
      let frames: Uint8Array[] | null = null;
      let decodeError: string | null = null;
      try {
        frames = decodeClipFrames(clip.frames, clip.width, clip.height);
      } catch (err) {
        decodeError = String(err);
      }
      return {
        candidate: clip.candidate,
        clip,
        frames,
        decodeError,
        frameIndex: 0,
        playing: true,
        speed: 1,
      };
    });
  }

  tile(candidate: string): TileState {
    const found = this.tiles.find((t) => t.candidate === candidate);
    if (!found) throw new Error(`unknown candidate ${candidate}`);
    return found;
  }

  /** Toggle a candidate's place in the ranking; click order is rank order. */
  toggleSelect(candidate: string): void {
    this.tile(candidate);
    const at = this.selection.indexOf(candidate);
    if (at >= 0) {
      this.selection.splice(at, 1);
    } else {
      this.selection.push(candidate);
    }
  }

  /** 1-based rank shown on the tile badge, or null when unselected. */
  rankOf(candidate: string): number | null {
    const at = this.selection.indexOf(candidate);
    return at >= 0 ? at + 1 : null;
  }

  /** The exact payload order for POST /votes. */
  ranking(): string[] {
    return [...this.selection];
  }

  canSubmit(): boolean {
    return this.selection.length > 0;
  }

  tick(): void {
    for (const tile of this.tiles) {
      if (!tile.playing || !tile.frames || tile.frames.length === 0) continue;
      tile.frameIndex =
        (tile.frameIndex + tile.speed) % tile.frames.length;
    }
  }

  scrub(candidate: string, frame: number): void {
    const tile = this.tile(candidate);
    if (!tile.frames) return;
    tile.frameIndex = Math.max(0, Math.min(frame, tile.frames.length - 1));
    tile.playing = false;
  }
}
