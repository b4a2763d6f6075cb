// Canvas model: a pure projection of API state plus transient UI state
// (selection, drag). Hydrating from the list endpoints after a hard refresh
// must reproduce the same model.

import type { GroupResource, PlanResource } from "./types.js";

export type PaneName = "use_cases" | "full_programs" | "plan_creation";

export interface PlanCard {
  plan: PlanResource;
  selected: boolean;
}

export interface GroupFrame {
  group: GroupResource;
}

export interface CanvasModel {
  activePane: PaneName;
  cards: Map<number, PlanCard>;
  frames: Map<number, GroupFrame>;
}

export function emptyModel(): CanvasModel {
  return { activePane: "use_cases", cards: new Map(), frames: new Map() };
}

export function hydrate(
  model: CanvasModel,
  plans: PlanResource[],
  groups: GroupResource[],
): void {
  const selected = new Set(
    [...model.cards.values()].filter((c) => c.selected).map((c) => c.plan.id),
  );
  model.cards = new Map(
    plans.map((plan) => [plan.id, { plan, selected: selected.has(plan.id) }]),
  );
  model.frames = new Map(groups.map((group) => [group.id, { group }]));
}

export function upsertPlan(model: CanvasModel, plan: PlanResource): void {
  const existing = model.cards.get(plan.id);
  model.cards.set(plan.id, { plan, selected: existing?.selected ?? false });
}

export function removePlan(model: CanvasModel, planId: number): void {
  model.cards.delete(planId);
  for (const [gid, frame] of [...model.frames]) {
    const remaining = frame.group.plan_ids.filter((id) => id !== planId);
    if (remaining.length === 0) {
      model.frames.delete(gid);
    } else {
      frame.group.plan_ids = remaining;
    }
  }
}

export function toggleSelected(model: CanvasModel, planId: number): void {
  const card = model.cards.get(planId);
  if (card) card.selected = !card.selected;
}

export function selectedPlanIds(model: CanvasModel): number[] {
  return [...model.cards.values()].filter((c) => c.selected).map((c) => c.plan.id);
}

/** Positions must stay finite; a drag that produces NaN is discarded. */
export function moveCard(model: CanvasModel, planId: number, x: number, y: number): boolean {
  if (!Number.isFinite(x) || !Number.isFinite(y)) return false;
  const card = model.cards.get(planId);
  if (!card) return false;
  card.plan.canvas_x = x;
  card.plan.canvas_y = y;
  return true;
}
