/** Browser entry point: wires the API client, session state, and canvas. */

import { ApiError, ReviewApi } from "./api.js";
import {
  ADJUSTED_STYLE,
  CANDIDATE_STYLE,
  clearCanvas,
  drawBox,
  drawImage,
} from "./canvas.js";
import { ReviewSession } from "./state.js";
import {
  boxToCanvas,
  clampBoxToImage,
  fitTransform,
  handleAt,
  panned,
  resizeBox,
  zoomedAt,
  type Box,
  type Handle,
  type ViewTransform,
} from "./transform.js";
import type { Action, Category, ReviewItem, WireBox } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function wireToBox(bbox: WireBox): Box {
  return { x: bbox[0], y: bbox[1], w: bbox[2], h: bbox[3] };
}

function boxToWire(box: Box): WireBox {
  return [box.x, box.y, box.w, box.h];
}

class App {
  private readonly api = new ReviewApi("");
  private session = new ReviewSession([]);
  private categories: Category[] = [];
  private readonly canvas = el<HTMLCanvasElement>("viewer");
  private readonly ctx = this.canvas.getContext("2d")!;
  private view: ViewTransform = { scale: 1, offsetX: 0, offsetY: 0 };
  private image: HTMLImageElement | null = null;
  private imageKey = "";
  private adjusted: Box | null = null;
  private dragHandle: Handle = null;
  private dragLast: [number, number] | null = null;
  private panning = false;
  private inFlight = false;

  async start(): Promise<void> {
    this.bindEvents();
    await this.loadAll();
  }

  /** (Re)build all client state from the API; a refresh reconstructs it. */
  private async loadAll(): Promise<void> {
    const [space, page] = await Promise.all([
      this.api.labelspace(),
      this.api.listItems({ limit: 500 }),
    ]);
    this.categories = space.categories;
    this.session = new ReviewSession(page.items);
    const picker = el<HTMLSelectElement>("category");
    picker.innerHTML = "";
    for (const cat of this.categories) {
      const opt = document.createElement("option");
      opt.value = String(cat.id);
      opt.textContent = `${cat.id}: ${cat.name}`;
      picker.appendChild(opt);
    }
    el("btn-retry").hidden = true;
    await this.showCurrent();
    await this.refreshStats();
  }

  connectionFailed(err: unknown): void {
    this.flash(`cannot reach the review service: ${err}`, true);
    el("btn-retry").hidden = false;
  }

  private categoryName(id: number): string {
    const cat = this.categories.find((c) => c.id === id);
    return cat ? cat.name : `category ${id}`;
  }

  private async showCurrent(): Promise<void> {
    const item = this.session.current();
    this.adjusted = null;
    this.dragHandle = null;
    if (!item) {
      this.image = null;
      this.imageKey = "";
      el("item-meta").textContent = "queue empty";
      clearCanvas(this.ctx);
      this.renderProgress();
      return;
    }
    const key = `${item.image.dataset}/${item.image.image_id}`;
    if (key !== this.imageKey) {
      this.image = await this.loadImage(item);
      this.imageKey = key;
      this.view = fitTransform(
        item.image.width,
        item.image.height,
        this.canvas.width,
        this.canvas.height,
        12,
      );
    }
    const picker = el<HTMLSelectElement>("category");
    picker.value = String(item.category_id);
    el("item-meta").textContent =
      `${item.item_id} | ${this.categoryName(item.category_id)} ` +
      `| conf ${item.confidence.toFixed(3)} | ${item.model_id} | ${item.status}`;
    this.render();
    this.renderProgress();
  }

  private loadImage(item: ReviewItem): Promise<HTMLImageElement> {
    return new Promise((resolve, reject) => {
      const img = new Image();
      img.onload = () => resolve(img);
      img.onerror = () => reject(new Error(`image failed: ${item.item_id}`));
      img.src = this.api.imageUrl(item.image.dataset, item.image.image_id);
    });
  }

  private render(): void {
    clearCanvas(this.ctx);
    const item = this.session.current();
    if (!item || !this.image) return;
    drawImage(this.ctx, this.image, item.image.width, item.image.height, this.view);
    drawBox(
      this.ctx,
      this.view,
      wireToBox(item.bbox),
      CANDIDATE_STYLE,
      this.categoryName(item.category_id),
      false,
    );
    if (this.adjusted) {
      drawBox(this.ctx, this.view, this.adjusted, ADJUSTED_STYLE, "adjusted", true);
    }
  }

  private renderProgress(): void {
    const p = this.session.progress();
    el("progress").textContent = `${p.decided}/${p.total} decided, ${p.pending} pending`;
  }

  private async refreshStats(): Promise<void> {
    try {
      const stats = await this.api.stats();
      const parts = Object.entries(stats.by_status)
        .filter(([, n]) => n > 0)
        .map(([status, n]) => `${status} ${n}`);
      el("stats").textContent =
        `server: ${stats.total} items (${parts.join(", ")}), ${stats.decisions} decisions`;
    } catch {
      el("stats").textContent = "server: stats unavailable";
    }
  }

  private flash(message: string, isError = false): void {
    const node = el("flash");
    node.textContent = message;
    node.className = isError ? "flash error" : "flash";
  }

  /** One mutation in flight at a time; repeats while waiting are ignored. */
  private async decide(action: Action, categoryId?: number): Promise<void> {
    if (this.inFlight) return;
    const item = this.session.current();
    if (!item) return;
    if (item.status !== "pending") {
      this.flash(`${item.item_id} already ${item.status}`, true);
      return;
    }
    const extras: { category_id?: number; bbox?: WireBox } = {};
    if (action === "relabel") {
      extras.category_id =
        categoryId ?? Number(el<HTMLSelectElement>("category").value);
    }
    if (action === "adjust") {
      if (!this.adjusted) {
        this.flash("press e or drag the box first, then press d to save", true);
        return;
      }
      extras.bbox = boxToWire(this.adjusted);
    }
    this.inFlight = true;
    try {
      const updated = await this.api.decide(item.item_id, action, extras);
      this.session.recordDecision(updated);
      this.flash(`${updated.item_id}: ${updated.status}`);
      await this.showCurrent();
      await this.refreshStats();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Someone else decided it; resync from the service, do not retry.
        this.flash(`${item.item_id} was already decided; queue refreshed`, true);
        await this.loadAll();
      } else if (err instanceof ApiError) {
        this.flash(`${err.status}: ${err.message}`, true);
      } else {
        this.connectionFailed(err);
      }
    } finally {
      this.inFlight = false;
    }
  }

  /** "e": toggle the adjustable copy of the box without submitting. */
  private toggleEdit(): void {
    const item = this.session.current();
    if (!item || item.status !== "pending") return;
    this.adjusted = this.adjusted ? null : wireToBox(item.bbox);
    this.render();
  }

  private quickRelabel(digit: number): void {
    const cat = this.categories[digit - 1];
    if (!cat) return;
    el<HTMLSelectElement>("category").value = String(cat.id);
    void this.decide("relabel", cat.id);
  }

  private canvasPoint(event: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [
      ((event.clientX - rect.left) * this.canvas.width) / rect.width,
      ((event.clientY - rect.top) * this.canvas.height) / rect.height,
    ];
  }

  private bindEvents(): void {
    this.canvas.addEventListener("wheel", (event) => {
      event.preventDefault();
      const [cx, cy] = this.canvasPoint(event);
      this.view = zoomedAt(this.view, cx, cy, event.deltaY < 0 ? 1.2 : 1 / 1.2);
      this.render();
    });

    this.canvas.addEventListener("mousedown", (event) => {
      const item = this.session.current();
      if (!item) return;
      const [cx, cy] = this.canvasPoint(event);
      const target = this.adjusted ?? wireToBox(item.bbox);
      const handle = handleAt(boxToCanvas(this.view, target), cx, cy);
      if (handle && item.status === "pending") {
        this.adjusted = this.adjusted ?? wireToBox(item.bbox);
        this.dragHandle = handle;
      } else {
        this.panning = true;
      }
      this.dragLast = [cx, cy];
    });

    this.canvas.addEventListener("mousemove", (event) => {
      if (!this.dragLast) return;
      const item = this.session.current();
      const [cx, cy] = this.canvasPoint(event);
      const dxCanvas = cx - this.dragLast[0];
      const dyCanvas = cy - this.dragLast[1];
      this.dragLast = [cx, cy];
      if (this.dragHandle && this.adjusted && item) {
        this.adjusted = clampBoxToImage(
          resizeBox(
            this.adjusted,
            this.dragHandle,
            dxCanvas / this.view.scale,
            dyCanvas / this.view.scale,
            item.image.width,
            item.image.height,
          ),
          item.image.width,
          item.image.height,
        );
        this.render();
      } else if (this.panning) {
        this.view = panned(this.view, dxCanvas, dyCanvas);
        this.render();
      }
    });

    const endDrag = () => {
      this.dragHandle = null;
      this.dragLast = null;
      this.panning = false;
    };
    this.canvas.addEventListener("mouseup", endDrag);
    this.canvas.addEventListener("mouseleave", endDrag);

    el("btn-accept").addEventListener("click", () => void this.decide("accept"));
    el("btn-reject").addEventListener("click", () => void this.decide("reject"));
    el("btn-relabel").addEventListener("click", () => void this.decide("relabel"));
    el("btn-adjust").addEventListener("click", () => void this.decide("adjust"));
    el("btn-prev").addEventListener("click", () => {
      this.session.retreat();
      void this.showCurrent();
    });
    el("btn-next").addEventListener("click", () => {
      this.session.advance();
      void this.showCurrent();
    });
    el("btn-retry").addEventListener("click", () => {
      void this.loadAll().catch((err) => this.connectionFailed(err));
    });

    window.addEventListener("keydown", (event) => {
      if (event.target instanceof HTMLSelectElement) return;
      if (/^[1-9]$/.test(event.key)) {
        this.quickRelabel(Number(event.key));
        event.preventDefault();
        return;
      }
      switch (event.key) {
        case "a": void this.decide("accept"); break;
        case "r":
        case "x": void this.decide("reject"); break;
        case "l": void this.decide("relabel"); break;
        case "e": this.toggleEdit(); break;
        case "b":
        case "d": void this.decide("adjust"); break;
        case "ArrowLeft": this.session.retreat(); void this.showCurrent(); break;
        case "ArrowRight": this.session.advance(); void this.showCurrent(); break;
        case "Escape":
          this.adjusted = null;
          this.render();
          break;
        default: return;
      }
      event.preventDefault();
    });
  }
}

window.addEventListener("DOMContentLoaded", () => {
  const app = new App();
  app.start().catch((err) => app.connectionFailed(err));
});
