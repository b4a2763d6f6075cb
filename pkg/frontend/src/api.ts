// Typed client for the authoring API. Every mutation goes through here; the
// UI holds no state the server does not confirm.

import type {
  ApiErrorBody,
  ByteSpan,
  CandidateSuggestion,
  DomainInfo,
  GroupResource,
  PlanPatch,
  PlanResource,
  ProgramRow,
  SimilarValues,
  UseCaseRow,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: {
        "X-Session-Id": this.sessionId,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    };
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let message = resp.statusText;
      try {
        const payload = (await resp.json()) as ApiErrorBody;
        if (payload.message) message = payload.message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, message);
    }
    if (resp.status === 204) return undefined as T;
    return (await resp.json()) as T;
  }

  listDomains(): Promise<DomainInfo[]> {
    return this.request("GET", "/domains");
  }

  listUseCases(domainId: number, query?: string): Promise<UseCaseRow[]> {
    const q = query ? `?q=${encodeURIComponent(query)}` : "";
    return this.request("GET", `/domains/${domainId}/use-cases${q}`);
  }

  listPrograms(domainId: number, query?: string): Promise<ProgramRow[]> {
    const q = query ? `?q=${encodeURIComponent(query)}` : "";
    return this.request("GET", `/domains/${domainId}/programs${q}`);
  }

  listPlans(domainId: number): Promise<PlanResource[]> {
    return this.request("GET", `/domains/${domainId}/plans`);
  }

  listGroups(domainId: number): Promise<GroupResource[]> {
    return this.request("GET", `/domains/${domainId}/groups`);
  }

  nextCandidate(domainId: number): Promise<CandidateSuggestion> {
    return this.request("GET", `/domains/${domainId}/candidates/next`);
  }

  createPlan(
    domainId: number,
    mode: "empty" | "from_selection" | "from_program" | "from_candidate",
    sourceRef?: number,
    selection?: { start: number; end: number },
  ): Promise<PlanResource> {
    return this.request("POST", "/plans", {
      domain_id: domainId,
      mode,
      ...(sourceRef !== undefined ? { source_ref: sourceRef } : {}),
      ...(selection !== undefined ? { selection } : {}),
    });
  }

  getPlan(planId: number): Promise<PlanResource> {
    return this.request("GET", `/plans/${planId}`);
  }

  patchPlan(planId: number, patch: PlanPatch): Promise<PlanResource> {
    return this.request("PATCH", `/plans/${planId}`, patch);
  }

  duplicatePlan(planId: number): Promise<PlanResource> {
    return this.request("POST", `/plans/${planId}/duplicate`);
  }

  deletePlan(planId: number): Promise<void> {
    return this.request("DELETE", `/plans/${planId}`);
  }

  addChangeableArea(planId: number, span: ByteSpan): Promise<PlanResource> {
    return this.request("POST", `/plans/${planId}/changeable-areas`, span);
  }

  deleteChangeableArea(planId: number, index: number): Promise<PlanResource> {
    return this.request("DELETE", `/plans/${planId}/changeable-areas/${index}`);
  }

  similarValues(planId: number, component: "name" | "goal" | "solution"): Promise<SimilarValues> {
    return this.request("GET", `/plans/${planId}/similar?component=${component}`);
  }

  createGroup(domainId: number, name: string, planIds: number[]): Promise<GroupResource> {
    return this.request("POST", "/groups", {
      domain_id: domainId,
      name,
      plan_ids: planIds,
    });
  }

  explain(code: string, start: number, end: number): Promise<{ explanation: string }> {
    return this.request("POST", "/explain", { code, start, end });
  }

  predictOutput(code: string): Promise<{ output: string }> {
    return this.request("POST", "/predict-output", { code });
  }
}
