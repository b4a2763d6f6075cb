// In-memory double of the authoring API for e2e tests. Implements the same
// contract the real service exposes (byte-offset spans, optimistic versions,
// size-descending suggestions, 410 on exhaustion) and records every request
// so tests can assert that no mutation bypassed the API.

import type { FetchLike } from "../api.js";
import type {
  ByteSpan,
  CandidateSuggestion,
  DomainInfo,
  GroupResource,
  PlanResource,
  ProgramRow,
  UseCaseRow,
} from "../types.js";

const encoder = new TextEncoder();

export interface LoggedRequest {
  method: string;
  path: string;
  body: unknown;
}

export interface MockData {
  domain: DomainInfo;
  useCases: UseCaseRow[];
  programs: ProgramRow[];
  candidates: CandidateSuggestion[];
}

interface StoredPlan extends PlanResource {}

export class MockApiServer {
  readonly log: LoggedRequest[] = [];
  private plans = new Map<number, StoredPlan>();
  private groups = new Map<number, GroupResource>();
  private shownBySession = new Map<string, Set<number>>();
  private nextPlanId = 1;
  private nextGroupId = 1;

  constructor(private readonly data: MockData) {}

  get fetch(): FetchLike {
    return (url, init) => Promise.resolve(this.handle(url, init));
  }

  mutationLog(): LoggedRequest[] {
    return this.log.filter((r) => r.method !== "GET");
  }

  planCount(): number {
    return this.plans.size;
  }

  plansSnapshot(): PlanResource[] {
    return [...this.plans.values()].map((p) => ({
      ...p,
      changeable_areas: p.changeable_areas.map((s) => ({ ...s })),
    }));
  }

  /** Bump a plan's version as if another client had edited it. */
  simulateConcurrentEdit(planId: number): void {
    const plan = this.plans.get(planId);
    if (plan) plan.version += 1;
  }

  private handle(url: string, init?: RequestInit): Response {
    const method = (init?.method ?? "GET").toUpperCase();
    const parsed = new URL(url, "http://mock");
    const path = parsed.pathname;
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    this.log.push({ method, path, body });
    const session =
      (init?.headers as Record<string, string> | undefined)?.["X-Session-Id"] ?? "anon";

    try {
      return this.route(method, path, parsed, body, session);
    } catch (err) {
      if (err instanceof HttpError) {
        return json(err.status, { code: err.status, message: err.message });
      }
      throw err;
    }
  }

  private route(
    method: string,
    path: string,
    url: URL,
    body: any,
    session: string,
  ): Response {
    const domainId = this.data.domain.id;
    let m: RegExpMatchArray | null;

    if (method === "GET" && path === "/domains") {
      return json(200, [this.data.domain]);
    }
    if (method === "GET" && path === `/domains/${domainId}/use-cases`) {
      const q = url.searchParams.get("q")?.toLowerCase();
      const rows = q
        ? this.data.useCases.filter((r) => r.description.toLowerCase().includes(q))
        : this.data.useCases;
      return json(200, rows);
    }
    if (method === "GET" && path === `/domains/${domainId}/programs`) {
      const q = url.searchParams.get("q")?.toLowerCase();
      const rows = q
        ? this.data.programs.filter((r) => r.annotated_source.toLowerCase().includes(q))
        : this.data.programs;
      return json(200, rows);
    }
    if (method === "GET" && path === `/domains/${domainId}/plans`) {
      return json(200, [...this.plans.values()]);
    }
    if (method === "GET" && path === `/domains/${domainId}/groups`) {
      return json(200, [...this.groups.values()]);
    }
    if (method === "GET" && path === `/domains/${domainId}/candidates/next`) {
      const shown = this.shownBySession.get(session) ?? new Set<number>();
      this.shownBySession.set(session, shown);
      const next = [...this.data.candidates]
        .sort((a, b) => b.size - a.size || a.id - b.id)
        .find((c) => !shown.has(c.id));
      if (!next) throw new HttpError(410, "all candidates suggested");
      shown.add(next.id);
      return json(200, next);
    }

    if (method === "POST" && path === "/plans") {
      return json(201, this.createPlan(body));
    }
    if ((m = path.match(/^\/plans\/(\d+)$/))) {
      const plan = this.mustPlan(Number(m[1]));
      if (method === "GET") return json(200, plan);
      if (method === "PATCH") return json(200, this.patchPlan(plan, body));
      if (method === "DELETE") {
        this.plans.delete(plan.id);
        if (plan.group_id !== null) this.shrinkGroup(plan.group_id, plan.id);
        return new Response(null, { status: 204 });
      }
    }
    if ((m = path.match(/^\/plans\/(\d+)\/duplicate$/)) && method === "POST") {
      const src = this.mustPlan(Number(m[1]));
      const copy: StoredPlan = {
        ...src,
        id: this.nextPlanId++,
        canvas_x: src.canvas_x + 24,
        canvas_y: src.canvas_y + 24,
        changeable_areas: src.changeable_areas.map((s) => ({ ...s })),
        version: 0,
      };
      this.plans.set(copy.id, copy);
      return json(201, copy);
    }
    if ((m = path.match(/^\/plans\/(\d+)\/changeable-areas$/)) && method === "POST") {
      const plan = this.mustPlan(Number(m[1]));
      return json(201, this.addSpan(plan, body));
    }
    if ((m = path.match(/^\/plans\/(\d+)\/changeable-areas\/(\d+)$/)) && method === "DELETE") {
      const plan = this.mustPlan(Number(m[1]));
      const index = Number(m[2]);
      if (index >= plan.changeable_areas.length) throw new HttpError(404, "no such span");
      plan.changeable_areas.splice(index, 1);
      plan.version += 1;
      return json(200, plan);
    }
    if ((m = path.match(/^\/plans\/(\d+)\/similar$/)) && method === "GET") {
      const component = url.searchParams.get("component") ?? "goal";
      const plan = this.mustPlan(Number(m[1]));
      const values = this.similarValues(plan, component);
      return json(200, { component, values });
    }
    if (method === "POST" && path === "/groups") {
      return json(201, this.createGroup(body));
    }
    if (method === "POST" && path === "/explain") {
      return json(200, { explanation: "These lines load the data." });
    }
    if (method === "POST" && path === "/predict-output") {
      return json(200, { output: "mock output" });
    }
    throw new HttpError(404, `no route for ${method} ${path}`);
  }

  // -- plan logic mirroring the server contract

  private mustPlan(id: number): StoredPlan {
    const plan = this.plans.get(id);
    if (!plan) throw new HttpError(404, `plan ${id} not found`);
    return plan;
  }

  private createPlan(body: any): StoredPlan {
    const n = this.plans.size;
    const plan: StoredPlan = {
      id: this.nextPlanId++,
      domain_id: this.data.domain.id,
      name: "",
      goal: "",
      solution: "",
      changeable_areas: [],
      provenance: body.mode,
      source_id: body.source_ref ?? null,
      candidate_id: null,
      canvas_x: 40 + (n % 4) * 280,
      canvas_y: 40 + Math.floor(n / 4) * 200,
      group_id: null,
      version: 0,
    };
    if (body.mode === "from_selection" || body.mode === "from_program") {
      const program = this.data.programs.find((p) => p.id === body.source_ref);
      if (!program) throw new HttpError(404, "program not found");
      const bytes = encoder.encode(program.annotated_source);
      if (body.mode === "from_selection") {
        const { start, end } = body.selection ?? {};
        if (
          typeof start !== "number" || typeof end !== "number" ||
          start < 0 || end <= start || end > bytes.length
        ) {
          throw new HttpError(422, "invalid selection span");
        }
        plan.solution = new TextDecoder().decode(bytes.slice(start, end));
      } else {
        plan.solution = program.annotated_source;
      }
      const useCase = this.data.useCases.find((u) => u.program_id === program.id);
      plan.name = useCase?.description ?? "";
    } else if (body.mode === "from_candidate") {
      const candidate = this.data.candidates.find((c) => c.id === body.source_ref);
      if (!candidate) throw new HttpError(404, "candidate not found");
      plan.name = candidate.name;
      plan.goal = candidate.representative.goal;
      plan.solution = candidate.representative.code;
      plan.changeable_areas = candidate.representative.spans.map((s) => ({ ...s }));
      plan.candidate_id = candidate.id;
    } else if (body.mode !== "empty") {
      throw new HttpError(422, `unknown mode ${body.mode}`);
    }
    this.plans.set(plan.id, plan);
    return plan;
  }

  private patchPlan(plan: StoredPlan, body: any): StoredPlan {
    if (body.version !== plan.version) {
      throw new HttpError(409, `plan ${plan.id} is at version ${plan.version}`);
    }
    for (const key of ["name", "goal", "solution", "canvas_x", "canvas_y"] as const) {
      if (body[key] !== undefined) (plan as any)[key] = body[key];
    }
    if (body.solution !== undefined) {
      const limit = encoder.encode(plan.solution).length;
      plan.changeable_areas = plan.changeable_areas.filter((s) => s.end <= limit);
    }
    plan.version += 1;
    return plan;
  }

  private addSpan(plan: StoredPlan, span: ByteSpan): StoredPlan {
    const limit = encoder.encode(plan.solution).length;
    if (span.start < 0 || span.end <= span.start || span.end > limit) {
      throw new HttpError(422, "span out of bounds");
    }
    for (const existing of plan.changeable_areas) {
      if (span.start < existing.end && existing.start < span.end) {
        throw new HttpError(422, "span overlaps an existing changeable area");
      }
    }
    plan.changeable_areas.push({ ...span });
    plan.changeable_areas.sort((a, b) => a.start - b.start);
    plan.version += 1;
    return plan;
  }

  private createGroup(body: any): GroupResource {
    const ids: number[] = body.plan_ids ?? [];
    if (ids.length === 0) throw new HttpError(422, "a group needs at least one plan");
    for (const id of ids) {
      const plan = this.mustPlan(id);
      if (plan.group_id !== null && !body.move) {
        throw new HttpError(409, `plan ${id} already grouped`);
      }
    }
    const group: GroupResource = {
      id: this.nextGroupId++,
      name: body.name,
      plan_ids: [...ids],
    };
    for (const id of ids) {
      const plan = this.mustPlan(id);
      if (plan.group_id !== null) this.shrinkGroup(plan.group_id, id);
      plan.group_id = group.id;
    }
    this.groups.set(group.id, group);
    return group;
  }

  private shrinkGroup(groupId: number, planId: number): void {
    const group = this.groups.get(groupId);
    if (!group) return;
    group.plan_ids = group.plan_ids.filter((id) => id !== planId);
    if (group.plan_ids.length === 0) this.groups.delete(groupId);
  }

  private similarValues(plan: StoredPlan, component: string): string[] {
    if (plan.candidate_id !== null) {
      const candidate = this.data.candidates.find((c) => c.id === plan.candidate_id);
      if (!candidate) return [];
      return component === "solution"
        ? [candidate.representative.code]
        : [candidate.representative.goal];
    }
    const text = ((plan as any)[component] ?? "") as string;
    const words = text.toLowerCase().split(/\s+/).filter(Boolean);
    if (words.length === 0) return [];
    const values: string[] = [];
    for (const candidate of this.data.candidates) {
      const hay = component === "solution"
        ? candidate.representative.code
        : candidate.representative.goal;
      if (words.some((w) => hay.toLowerCase().includes(w))) values.push(hay);
    }
    return values.slice(0, 10);
  }
}

class HttpError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

function json(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function fixtureData(): MockData {
  const programA =
    "# Import the data analysis library\nimport pandas as pd\n\n" +
    '# Load the dataset from data_1.csv\ndf = pd.read_csv("data_1.csv")\n' +
    "# Show the first rows\nprint(df.head())\n";
  const programB =
    "import pandas as pd\n" +
    'left = pd.read_csv("left.csv")\nright = pd.read_csv("right.csv")\n' +
    '# Join the tables\nmerged = left.merge(right, on="key")\nprint(merged.shape)\n';
  const programC =
    "# Compute statistics\nimport pandas as pd\n" +
    'df = pd.read_csv("survey.csv")\nprint(df.describe())\n';
  return {
    domain: { id: 1, name: "pandas", library_name: "pandas", language: "python" },
    useCases: [
      { id: 1, ordinal: 1, description: "Reading a CSV file", program_id: 1 },
      { id: 2, ordinal: 2, description: "Combining two tables", program_id: 2 },
      { id: 3, ordinal: 3, description: "Summary statistics", program_id: 3 },
    ],
    programs: [
      { id: 1, use_case_id: 1, annotated_source: programA, syntactically_valid: true, origin: "generated" },
      { id: 2, use_case_id: 2, annotated_source: programB, syntactically_valid: true, origin: "generated" },
      { id: 3, use_case_id: 3, annotated_source: programC, syntactically_valid: true, origin: "generated" },
    ],
    candidates: [
      {
        id: 11, name: "Loading tabular data", pending_name: false, size: 9,
        representative: {
          snippet_id: 101, program_id: 1, goal: "Load the dataset from data_1.csv",
          code: 'df = pd.read_csv("data_1.csv")\n',
          spans: [{ start: 18, end: 30, note: null }],
        },
      },
      {
        id: 12, name: "Joining tables on a key", pending_name: false, size: 5,
        representative: {
          snippet_id: 102, program_id: 2, goal: "Join the tables",
          code: 'merged = left.merge(right, on="key")\n', spans: [],
        },
      },
      {
        id: 13, name: "Describing a dataset", pending_name: false, size: 2,
        representative: {
          snippet_id: 103, program_id: 3, goal: "Compute statistics",
          code: "print(df.describe())\n", spans: [],
        },
      },
    ],
  };
}
