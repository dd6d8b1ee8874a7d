/** DOM shell: renders the pool view and wires keyboard + mouse input. */
import { ApiError, fetchNext, submitAnnotation, type ApiConfig } from "./api.js";
import { handleKey } from "./keyboard.js";
import {
  canSubmit,
  canToggleNone,
  clearGrade,
  fromPayload,
  setGrade,
  toggleNone,
  toRecord,
  type PoolView,
} from "./state.js";
import { GRADES, GRADE_HINTS } from "./types.js";

const LEASE_HEARTBEAT_MS = 5 * 60 * 1000;

interface AppState {
  view: PoolView | null;
  focusIndex: number;
  banner: string | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class App {
  private state: AppState = { view: null, focusIndex: 0, banner: null };
  private heartbeat: number | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly config: ApiConfig,
  ) {}

  async start(): Promise<void> {
    document.addEventListener("keydown", (e) => this.onKey(e));
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
    try {
      const payload = await fetchNext(this.config);
      this.state = {
        view: payload ? fromPayload(payload) : null,
        focusIndex: 0,
        banner: null,
      };
    } catch (err) {
      this.state.banner = err instanceof ApiError ? err.message : "network error — retry";
    }
    this.resetHeartbeat();
    this.render();
  }

  /** Single-tab lease keep-alive: refetching before expiry renews nothing
   * server-side, but surfaces a conflict banner if another tab stole it. */
  private resetHeartbeat(): void {
    if (this.heartbeat !== null) window.clearInterval(this.heartbeat);
    this.heartbeat = window.setInterval(() => {
      const view = this.state.view;
      if (view?.leaseExpiry && new Date(view.leaseExpiry) < new Date()) {
        this.state.banner = "lease expired — fetching a fresh pool";
        void this.loadNext();
      }
    }, LEASE_HEARTBEAT_MS);
  }

  private onKey(e: KeyboardEvent): void {
    if (!this.state.view) return;
    if (e.key === "Enter" && canSubmit(this.state.view)) {
      void this.submit();
      return;
    }
    const result = handleKey(this.state.view, this.state.focusIndex, e.key);
    if (result.view !== this.state.view || result.focusIndex !== this.state.focusIndex) {
      this.state.view = result.view;
      this.state.focusIndex = result.focusIndex;
      this.render();
    }
  }

  private async submit(): Promise<void> {
    const view = this.state.view;
    if (!view) return;
    try {
      await submitAnnotation(this.config, toRecord(view, this.config.annotatorId));
      await this.loadNext();
    } catch (err) {
      this.state.banner = err instanceof ApiError ? err.message : "submit failed — retry";
      if (err instanceof ApiError && err.status === 409) {
        await this.loadNext(); // lease conflict: move on to a fresh pool
      } else {
        this.render();
      }
    }
  }

  private render(): void {
    this.root.replaceChildren();
    if (this.state.banner) {
      this.root.appendChild(el("div", "banner", this.state.banner));
    }
    const view = this.state.view;
    if (!view) {
      this.root.appendChild(
        el("div", "empty-state", "No pools waiting — check back later."),
      );
      return;
    }

    const contextBox = el("section", "context");
    for (const turn of view.context) {
      const row = el("div", `turn turn-${turn.speaker.toLowerCase()}`);
      row.appendChild(el("span", "speaker", turn.speaker));
      row.appendChild(el("span", "text", turn.text));
      contextBox.appendChild(row);
    }
    this.root.appendChild(contextBox);

    const list = el("section", "candidates");
    view.candidates.forEach((cand, i) => {
      const row = el(
        "div",
        i === this.state.focusIndex ? "candidate focused" : "candidate",
      );
      row.appendChild(el("span", "text", cand.text));
      if (cand.rg_name) {
        row.appendChild(el("span", "rg-badge", cand.rg_name));
      }
      const controls = el("span", "grades");
      for (const grade of GRADES) {
        const btn = el(
          "button",
          view.grades.get(cand.candidate_id) === grade ? "grade selected" : "grade",
          grade,
        );
        btn.title = GRADE_HINTS[grade];
        btn.addEventListener("click", () => {
          this.state.view = setGrade(view, cand.candidate_id, grade);
          this.state.focusIndex = i;
          this.render();
        });
        controls.appendChild(btn);
      }
      const clear = el("button", "grade clear", "×");
      clear.addEventListener("click", () => {
        this.state.view = clearGrade(view, cand.candidate_id);
        this.render();
      });
      controls.appendChild(clear);
      row.appendChild(controls);
      list.appendChild(row);
    });
    this.root.appendChild(list);

    const noneRow = el("div", "none-row");
    const noneBox = el("input") as HTMLInputElement;
    noneBox.type = "checkbox";
    noneBox.checked = view.noneOfTheAbove;
    noneBox.disabled = !canToggleNone(view);
    noneBox.addEventListener("change", () => {
      this.state.view = toggleNone(view);
      this.render();
    });
    noneRow.appendChild(noneBox);
    noneRow.appendChild(el("label", "", "None of the above"));
    this.root.appendChild(noneRow);

    const submit = el("button", "submit", "Submit (Enter)");
    submit.disabled = !canSubmit(view);
    submit.addEventListener("click", () => void this.submit());
    this.root.appendChild(submit);
  }
}

function boot(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const app = new App(root, {
    baseUrl: "",
    annotatorId: params.get("annotator") ?? "anonymous",
    token: params.get("token") ?? undefined,
  });
  void app.start();
}

if (typeof document !== "undefined") {
  boot();
}
