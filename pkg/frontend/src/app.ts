// Instructor-facing single-page app: program browser, plan canvas, and the
// refinement editor. All persistent state lives behind the API client; the
// DOM re-renders from the hydrated model, so a hard refresh (a fresh boot
// against the same server) reproduces the same canvas.

import { ApiClient, ApiError } from "./api.js";
import { debounce, type Debounced } from "./debounce.js";
import { highlight } from "./highlight.js";
import {
  emptyModel,
  hydrate,
  moveCard,
  removePlan,
  selectedPlanIds,
  toggleSelected,
  upsertPlan,
  type CanvasModel,
  type PaneName,
} from "./state.js";
import type { DomainInfo, PlanResource, ProgramRow, UseCaseRow } from "./types.js";
import { byteToChar, charToByte } from "./utf8.js";

export interface AppOptions {
  root: HTMLElement;
  api: ApiClient;
  debounceMs?: number;
}

interface EditorState {
  planId: number | null;
  spanError: string;
}

export class App {
  readonly model: CanvasModel = emptyModel();
  domain!: DomainInfo;
  useCases: UseCaseRow[] = [];
  programs: ProgramRow[] = [];
  activeProgram: ProgramRow | null = null;
  suggestExhausted = false;
  private editor: EditorState = { planId: null, spanError: "" };
  private patches = new Map<number, Debounced<[number, Record<string, unknown>]>>();
  private readonly debounceMs: number;

  private constructor(
    readonly root: HTMLElement,
    readonly api: ApiClient,
    debounceMs: number,
  ) {
    this.debounceMs = debounceMs;
  }

  /** Fetch everything the canvas needs and render. The e2e "hard refresh"
   * is simply calling boot again on a fresh root. */
  static async boot(options: AppOptions): Promise<App> {
    const app = new App(options.root, options.api, options.debounceMs ?? 400);
    const domains = await options.api.listDomains();
    if (domains.length === 0) throw new Error("no domains in the store");
    app.domain = domains[0]!;
    await app.refresh();
    app.renderShell();
    app.renderAll();
    return app;
  }

  async refresh(): Promise<void> {
    const [useCases, programs, plans, groups] = await Promise.all([
      this.api.listUseCases(this.domain.id),
      this.api.listPrograms(this.domain.id),
      this.api.listPlans(this.domain.id),
      this.api.listGroups(this.domain.id),
    ]);
    this.useCases = useCases;
    this.programs = programs;
    hydrate(this.model, plans, groups);
  }

  // ------------------------------------------------------------------
  // Shell and panes

  private renderShell(): void {
    this.root.innerHTML = `
      <div class="banners"></div>
      <nav class="tabs">
        <button class="tab" data-pane="use_cases">Use Cases</button>
        <button class="tab" data-pane="full_programs">Full Programs</button>
        <button class="tab" data-pane="plan_creation">Plan Creation</button>
      </nav>
      <section class="pane pane-use-cases"></section>
      <section class="pane pane-full-programs" hidden></section>
      <section class="pane pane-plan-creation" hidden></section>
    `;
    this.root.querySelectorAll<HTMLButtonElement>(".tab").forEach((btn) => {
      btn.addEventListener("click", () => {
        this.setPane(btn.dataset.pane as PaneName);
      });
    });
  }

  setPane(pane: PaneName): void {
    this.model.activePane = pane;
    this.renderAll();
  }

  renderAll(): void {
    const panes: Record<PaneName, HTMLElement> = {
      use_cases: this.root.querySelector(".pane-use-cases")!,
      full_programs: this.root.querySelector(".pane-full-programs")!,
      plan_creation: this.root.querySelector(".pane-plan-creation")!,
    };
    for (const [name, el] of Object.entries(panes)) {
      el.hidden = name !== this.model.activePane;
    }
    this.root.querySelectorAll<HTMLButtonElement>(".tab").forEach((btn) => {
      btn.classList.toggle("active", btn.dataset.pane === this.model.activePane);
    });
    this.renderUseCasesPane(panes.use_cases);
    this.renderFullProgramsPane(panes.full_programs);
    this.renderCanvasPane(panes.plan_creation);
  }

  banner(message: string): void {
    const host = this.root.querySelector(".banners")!;
    const div = document.createElement("div");
    div.className = "banner";
    div.textContent = message;
    const dismiss = document.createElement("button");
    dismiss.className = "banner-dismiss";
    dismiss.textContent = "dismiss";
    dismiss.addEventListener("click", () => div.remove());
    div.appendChild(dismiss);
    host.appendChild(div);
  }

  private async guard<T>(work: () => Promise<T>): Promise<T | undefined> {
    try {
      return await work();
    } catch (err) {
      this.banner(err instanceof Error ? err.message : String(err));
      return undefined;
    }
  }

  // ------------------------------------------------------------------
  // Use-case browser

  private renderUseCasesPane(pane: HTMLElement): void {
    if (!pane.querySelector(".use-case-list")) {
      pane.innerHTML = `
        <div class="browser">
          <div class="left">
            <input class="search-use-cases" placeholder="Search use cases" />
            <ul class="use-case-list"></ul>
          </div>
          <div class="right program-panel"></div>
        </div>
      `;
      const search = pane.querySelector<HTMLInputElement>(".search-use-cases")!;
      search.addEventListener("input", () => {
        void this.guard(async () => {
          this.useCases = await this.api.listUseCases(
            this.domain.id,
            search.value.trim() || undefined,
          );
          this.renderUseCaseList(pane);
        });
      });
    }
    this.renderUseCaseList(pane);
    this.renderProgramPanel(pane.querySelector(".program-panel")!);
  }

  private renderUseCaseList(pane: HTMLElement): void {
    const list = pane.querySelector<HTMLUListElement>(".use-case-list")!;
    list.innerHTML = "";
    for (const row of this.useCases) {
      const item = document.createElement("li");
      item.className = "use-case-item";
      item.dataset.useCaseId = String(row.id);
      item.textContent = `${row.ordinal}. ${row.description}`;
      item.addEventListener("click", () => {
        const program = this.programs.find((p) => p.id === row.program_id);
        this.activeProgram = program ?? null;
        this.renderAll();
      });
      list.appendChild(item);
    }
  }

  /** Highlighted code with a transparent textarea overlay so native text
   * selection still works; the textarea is the selection authority. */
  private codeViewer(program: ProgramRow): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "code-viewer";
    wrap.dataset.programId = String(program.id);
    const pre = document.createElement("pre");
    pre.className = "code-highlight";
    pre.innerHTML = highlight(program.annotated_source);
    const overlay = document.createElement("textarea");
    overlay.className = "code-select";
    overlay.readOnly = true;
    overlay.value = program.annotated_source;
    overlay.addEventListener("select", () => this.updateSelectionButtons());
    overlay.addEventListener("keyup", () => this.updateSelectionButtons());
    overlay.addEventListener("mouseup", () => this.updateSelectionButtons());
    wrap.append(pre, overlay);
    return wrap;
  }

  private renderProgramPanel(panel: HTMLElement): void {
    panel.innerHTML = "";
    if (!this.activeProgram) {
      panel.textContent = "Select a use case to view its program.";
      return;
    }
    const program = this.activeProgram;
    panel.appendChild(this.codeViewer(program));
    const bar = document.createElement("div");
    bar.className = "actions";
    bar.innerHTML = `
      <button class="create-from-selection" disabled>Create Plan from Selection</button>
      <button class="create-from-program">Create Plan from Program</button>
      <button class="view-explanation" disabled>View Explanation</button>
      <button class="run-code">Run Code</button>
    `;
    panel.appendChild(bar);
    const output = document.createElement("pre");
    output.className = "llm-output";
    panel.appendChild(output);

    bar.querySelector(".create-from-selection")!.addEventListener("click", () => {
      const sel = this.currentSelection(panel);
      if (!sel) return;
      void this.guard(async () => {
        const plan = await this.api.createPlan(
          this.domain.id, "from_selection", program.id, sel,
        );
        upsertPlan(this.model, plan);
        this.renderAll();
      });
    });
    bar.querySelector(".create-from-program")!.addEventListener("click", () => {
      void this.guard(async () => {
        const plan = await this.api.createPlan(this.domain.id, "from_program", program.id);
        upsertPlan(this.model, plan);
        this.renderAll();
      });
    });
    bar.querySelector(".view-explanation")!.addEventListener("click", () => {
      const sel = this.currentSelection(panel);
      if (!sel) return;
      void this.guard(async () => {
        const res = await this.api.explain(program.annotated_source, sel.start, sel.end);
        output.textContent = res.explanation;
      });
    });
    bar.querySelector(".run-code")!.addEventListener("click", () => {
      void this.guard(async () => {
        const res = await this.api.predictOutput(program.annotated_source);
        output.textContent = res.output;
      });
    });
  }

  /** Current selection of the panel's overlay textarea, in byte offsets. */
  private currentSelection(panel: HTMLElement): { start: number; end: number } | null {
    const overlay = panel.querySelector<HTMLTextAreaElement>(".code-select");
    if (!overlay || overlay.selectionStart === overlay.selectionEnd) return null;
    const text = overlay.value;
    return {
      start: charToByte(text, overlay.selectionStart),
      end: charToByte(text, overlay.selectionEnd),
    };
  }

  updateSelectionButtons(): void {
    this.root.querySelectorAll<HTMLElement>(".program-panel, .program-card").forEach((panel) => {
      const has = this.currentSelection(panel) !== null;
      panel
        .querySelectorAll<HTMLButtonElement>(".create-from-selection, .view-explanation")
        .forEach((btn) => (btn.disabled = !has));
    });
  }

  // ------------------------------------------------------------------
  // Full-programs browser

  private renderFullProgramsPane(pane: HTMLElement): void {
    if (!pane.querySelector(".program-list")) {
      pane.innerHTML = `
        <input class="search-programs" placeholder="Search all programs" />
        <div class="program-list"></div>
      `;
      const search = pane.querySelector<HTMLInputElement>(".search-programs")!;
      search.addEventListener("input", () => {
        void this.guard(async () => {
          this.programs = await this.api.listPrograms(
            this.domain.id,
            search.value.trim() || undefined,
          );
          this.renderProgramList(pane);
        });
      });
    }
    this.renderProgramList(pane);
  }

  private renderProgramList(pane: HTMLElement): void {
    const list = pane.querySelector<HTMLElement>(".program-list")!;
    list.innerHTML = "";
    for (const program of this.programs) {
      const card = document.createElement("div");
      card.className = "program-card";
      card.dataset.programId = String(program.id);
      card.appendChild(this.codeViewer(program));
      const btn = document.createElement("button");
      btn.className = "create-from-selection";
      btn.textContent = "Create Plan from Selection";
      btn.disabled = true;
      btn.addEventListener("click", () => {
        const sel = this.currentSelection(card);
        if (!sel) return;
        void this.guard(async () => {
          const plan = await this.api.createPlan(
            this.domain.id, "from_selection", program.id, sel,
          );
          upsertPlan(this.model, plan);
          this.renderAll();
        });
      });
      card.appendChild(btn);
      list.appendChild(card);
    }
  }

  // ------------------------------------------------------------------
  // Plan-creation canvas

  private renderCanvasPane(pane: HTMLElement): void {
    if (!pane.querySelector(".canvas")) {
      pane.innerHTML = `
        <div class="canvas-toolbar">
          <button class="suggest-plan">Suggest Plan</button>
          <button class="new-empty-plan">New Plan</button>
          <button class="duplicate-selected" disabled>Duplicate</button>
          <button class="group-selected" disabled>Group</button>
          <input class="group-name-input" placeholder="Group name" hidden />
        </div>
        <div class="canvas"></div>
        <div class="editor-panel"></div>
      `;
      pane.querySelector(".suggest-plan")!.addEventListener("click", () => {
        void this.suggestPlan();
      });
      pane.querySelector(".new-empty-plan")!.addEventListener("click", () => {
        void this.guard(async () => {
          const plan = await this.api.createPlan(this.domain.id, "empty");
          upsertPlan(this.model, plan);
          this.editor = { planId: plan.id, spanError: "" };
          this.renderAll();
        });
      });
      pane.querySelector(".duplicate-selected")!.addEventListener("click", () => {
        void this.duplicateSelected();
      });
      pane.querySelector(".group-selected")!.addEventListener("click", () => {
        void this.groupSelected();
      });
    }
    const suggest = pane.querySelector<HTMLButtonElement>(".suggest-plan")!;
    suggest.disabled = this.suggestExhausted;
    this.renderCanvas(pane.querySelector(".canvas")!);
    this.renderToolbarState(pane);
    this.renderEditor(pane.querySelector(".editor-panel")!);
  }

  private renderToolbarState(pane: HTMLElement): void {
    const selected = selectedPlanIds(this.model);
    pane.querySelector<HTMLButtonElement>(".duplicate-selected")!.disabled =
      selected.length !== 1;
    pane.querySelector<HTMLButtonElement>(".group-selected")!.disabled =
      selected.length < 2;
  }

  private renderCanvas(canvas: HTMLElement): void {
    canvas.innerHTML = "";
    for (const frame of this.model.frames.values()) {
      const cards = frame.group.plan_ids
        .map((id) => this.model.cards.get(id))
        .filter((c) => c !== undefined);
      if (cards.length === 0) continue;
      const xs = cards.map((c) => c!.plan.canvas_x);
      const ys = cards.map((c) => c!.plan.canvas_y);
      const div = document.createElement("div");
      div.className = "group-frame";
      div.dataset.groupId = String(frame.group.id);
      div.style.left = `${Math.min(...xs) - 12}px`;
      div.style.top = `${Math.min(...ys) - 28}px`;
      const label = document.createElement("span");
      label.className = "group-name";
      label.textContent = frame.group.name;
      div.appendChild(label);
      canvas.appendChild(div);
    }
    for (const card of this.model.cards.values()) {
      canvas.appendChild(this.planCard(card.plan, card.selected));
    }
  }

  private planCard(plan: PlanResource, selected: boolean): HTMLElement {
    const div = document.createElement("div");
    div.className = "plan-card" + (selected ? " selected" : "");
    div.dataset.planId = String(plan.id);
    div.style.left = `${plan.canvas_x}px`;
    div.style.top = `${plan.canvas_y}px`;
    const title = document.createElement("div");
    title.className = "plan-card-title";
    title.textContent = plan.name || "(untitled plan)";
    const body = document.createElement("pre");
    body.className = "plan-card-code";
    body.textContent = plan.solution.slice(0, 400);
    div.append(title, body);

    div.addEventListener("click", (event) => {
      if ((event as MouseEvent).shiftKey) {
        toggleSelected(this.model, plan.id);
      } else {
        this.editor = { planId: plan.id, spanError: "" };
      }
      this.renderAll();
    });
    this.wireDrag(div, plan.id, title);
    return div;
  }

  private wireDrag(card: HTMLElement, planId: number, handle: HTMLElement): void {
    handle.addEventListener("mousedown", (down) => {
      const event = down as MouseEvent;
      const startX = event.clientX;
      const startY = event.clientY;
      const plan = this.model.cards.get(planId)?.plan;
      if (!plan) return;
      const origX = plan.canvas_x;
      const origY = plan.canvas_y;
      const move = (ev: Event) => {
        const m = ev as MouseEvent;
        if (moveCard(this.model, planId, origX + m.clientX - startX, origY + m.clientY - startY)) {
          card.style.left = `${origX + m.clientX - startX}px`;
          card.style.top = `${origY + m.clientY - startY}px`;
        }
      };
      const up = () => {
        document.removeEventListener("mousemove", move);
        document.removeEventListener("mouseup", up);
        const current = this.model.cards.get(planId)?.plan;
        if (!current) return;
        void this.guard(async () => {
          const updated = await this.api.patchPlan(planId, {
            version: current.version,
            canvas_x: current.canvas_x,
            canvas_y: current.canvas_y,
          });
          upsertPlan(this.model, updated);
        });
      };
      document.addEventListener("mousemove", move);
      document.addEventListener("mouseup", up);
    });
  }

  async suggestPlan(): Promise<void> {
    try {
      const suggestion = await this.api.nextCandidate(this.domain.id);
      const plan = await this.api.createPlan(
        this.domain.id, "from_candidate", suggestion.id,
      );
      upsertPlan(this.model, plan);
      this.editor = { planId: plan.id, spanError: "" };
    } catch (err) {
      if (err instanceof ApiError && err.status === 410) {
        this.suggestExhausted = true;
      } else {
        this.banner(err instanceof Error ? err.message : String(err));
      }
    }
    this.renderAll();
  }

  private async duplicateSelected(): Promise<void> {
    const [planId] = selectedPlanIds(this.model);
    if (planId === undefined) return;
    await this.guard(async () => {
      const copy = await this.api.duplicatePlan(planId);
      upsertPlan(this.model, copy);
      this.renderAll();
    });
  }

  private async groupSelected(): Promise<void> {
    const pane = this.root.querySelector(".pane-plan-creation")!;
    const input = pane.querySelector<HTMLInputElement>(".group-name-input")!;
    if (input.hidden) {
      input.hidden = false;
      input.focus();
      const commit = async () => {
        input.hidden = true;
        const name = input.value.trim() || "Unnamed group";
        input.value = "";
        const planIds = selectedPlanIds(this.model);
        await this.guard(async () => {
          await this.api.createGroup(this.domain.id, name, planIds);
          await this.refresh();
          this.renderAll();
        });
      };
      input.addEventListener(
        "keydown",
        (ev) => {
          if ((ev as KeyboardEvent).key === "Enter") void commit();
        },
        { once: true },
      );
      return;
    }
  }

  // ------------------------------------------------------------------
  // Refinement editor

  private patcherFor(planId: number): Debounced<[number, Record<string, unknown>]> {
    let patcher = this.patches.get(planId);
    if (!patcher) {
      patcher = debounce((version: number, fields: Record<string, unknown>) => {
        void this.sendPatch(planId, version, fields);
      }, this.debounceMs);
      this.patches.set(planId, patcher);
    }
    return patcher;
  }

  /** PATCH with the optimistic version token; on 409, re-fetch and replay
   * the same edit once on top of the fresh version. */
  private async sendPatch(
    planId: number,
    version: number,
    fields: Record<string, unknown>,
  ): Promise<void> {
    try {
      const updated = await this.api.patchPlan(planId, { version, ...fields } as never);
      upsertPlan(this.model, updated);
      this.renderAll();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        const fresh = await this.api.getPlan(planId);
        upsertPlan(this.model, fresh);
        const replayed = await this.api.patchPlan(planId, {
          version: fresh.version,
          ...fields,
        } as never);
        upsertPlan(this.model, replayed);
        this.renderAll();
        return;
      }
      this.banner(err instanceof Error ? err.message : String(err));
    }
  }

  flushEdits(): void {
    for (const patcher of this.patches.values()) patcher.flush();
  }

  private renderEditor(panel: HTMLElement): void {
    const planId = this.editor.planId;
    const card = planId !== null ? this.model.cards.get(planId) : undefined;
    if (!card) {
      panel.innerHTML = "<p class=\"editor-empty\">Select a plan card to refine it.</p>";
      return;
    }
    const plan = card.plan;
    panel.innerHTML = `
      <div class="editor">
        <label>Name <input class="field-name" value="" /></label>
        <div class="similar similar-name" hidden></div>
        <label>Goal <input class="field-goal" value="" /></label>
        <div class="similar similar-goal" hidden></div>
        <label>Solution <textarea class="field-solution"></textarea></label>
        <div class="similar similar-solution" hidden></div>
        <div class="solution-preview"></div>
        <div class="editor-actions">
          <button class="mark-changeable">Add to Changeable Areas</button>
          <span class="span-error"></span>
          <button class="delete-plan">Delete Plan</button>
        </div>
        <ul class="span-list"></ul>
      </div>
    `;
    const nameField = panel.querySelector<HTMLInputElement>(".field-name")!;
    const goalField = panel.querySelector<HTMLInputElement>(".field-goal")!;
    const solutionField = panel.querySelector<HTMLTextAreaElement>(".field-solution")!;
    nameField.value = plan.name;
    goalField.value = plan.goal;
    solutionField.value = plan.solution;
    panel.querySelector<HTMLElement>(".span-error")!.textContent = this.editor.spanError;

    const wireField = (
      el: HTMLInputElement | HTMLTextAreaElement,
      field: "name" | "goal" | "solution",
    ) => {
      el.addEventListener("input", () => {
        const current = this.model.cards.get(plan.id)?.plan;
        if (!current) return;
        this.patcherFor(plan.id)(current.version, { [field]: el.value });
      });
      el.addEventListener("focus", () => {
        void this.loadSimilar(panel, plan.id, field);
      });
    };
    wireField(nameField, "name");
    wireField(goalField, "goal");
    wireField(solutionField, "solution");

    this.renderSolutionPreview(panel, plan);
    this.renderSpanList(panel, plan);

    panel.querySelector(".mark-changeable")!.addEventListener("click", () => {
      void this.markChangeable(panel, plan.id);
    });
    panel.querySelector(".delete-plan")!.addEventListener("click", () => {
      void this.guard(async () => {
        await this.api.deletePlan(plan.id);
        removePlan(this.model, plan.id);
        this.editor = { planId: null, spanError: "" };
        await this.refresh();
        this.renderAll();
      });
    });
  }

  private renderSolutionPreview(panel: HTMLElement, plan: PlanResource): void {
    const preview = panel.querySelector<HTMLElement>(".solution-preview")!;
    const text = plan.solution;
    let html = "";
    let cursor = 0;
    for (const span of plan.changeable_areas) {
      const from = byteToChar(text, span.start);
      const to = byteToChar(text, span.end);
      html += escapeText(text.slice(cursor, from));
      html += `<mark class="changeable" title="${escapeText(span.note ?? "")}">` +
        `${escapeText(text.slice(from, to))}</mark>`;
      cursor = to;
    }
    html += escapeText(text.slice(cursor));
    preview.innerHTML = `<pre>${html}</pre>`;
  }

  private renderSpanList(panel: HTMLElement, plan: PlanResource): void {
    const list = panel.querySelector<HTMLUListElement>(".span-list")!;
    list.innerHTML = "";
    plan.changeable_areas.forEach((span, index) => {
      const item = document.createElement("li");
      item.className = "span-item";
      const from = byteToChar(plan.solution, span.start);
      const to = byteToChar(plan.solution, span.end);
      item.textContent = `${plan.solution.slice(from, to)}${span.note ? ` — ${span.note}` : ""}`;
      const remove = document.createElement("button");
      remove.className = "span-remove";
      remove.textContent = "remove";
      remove.addEventListener("click", () => {
        void this.guard(async () => {
          const updated = await this.api.deleteChangeableArea(plan.id, index);
          upsertPlan(this.model, updated);
          this.renderAll();
        });
      });
      item.appendChild(remove);
      list.appendChild(item);
    });
  }

  private async markChangeable(panel: HTMLElement, planId: number): Promise<void> {
    const solutionField = panel.querySelector<HTMLTextAreaElement>(".field-solution")!;
    if (solutionField.selectionStart === solutionField.selectionEnd) {
      this.editor.spanError = "Select part of the solution first.";
      this.renderAll();
      return;
    }
    const text = solutionField.value;
    const span = {
      start: charToByte(text, solutionField.selectionStart),
      end: charToByte(text, solutionField.selectionEnd),
      note: null,
    };
    try {
      const updated = await this.api.addChangeableArea(planId, span);
      this.editor.spanError = "";
      upsertPlan(this.model, updated);
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.editor.spanError = err.message;
      } else {
        this.banner(err instanceof Error ? err.message : String(err));
      }
    }
    this.renderAll();
  }

  private async loadSimilar(
    panel: HTMLElement,
    planId: number,
    component: "name" | "goal" | "solution",
  ): Promise<void> {
    const host = panel.querySelector<HTMLElement>(`.similar-${component}`)!;
    const res = await this.guard(() => this.api.similarValues(planId, component));
    if (!res) return;
    host.hidden = false;
    host.innerHTML = "";
    for (const value of res.values) {
      const btn = document.createElement("button");
      btn.className = "similar-value";
      btn.textContent = value.length > 120 ? value.slice(0, 117) + "..." : value;
      btn.dataset.value = value;
      btn.addEventListener("click", () => {
        const current = this.model.cards.get(planId)?.plan;
        if (!current) return;
        void this.sendPatch(planId, current.version, { [component]: value });
      });
      host.appendChild(btn);
    }
  }
}

function escapeText(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
