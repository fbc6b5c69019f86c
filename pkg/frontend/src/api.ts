/** Typed client for the query service. */

import type {
  ApiErrorJson,
  DatasetInfoJson,
  QueryRequestJson,
  QueryResponseJson,
} from "./types.js";

export class ApiRequestError extends Error {
  status: number;
  code: string;
  fieldPath?: string;

  constructor(status: number, body: ApiErrorJson) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.fieldPath = body.fieldPath;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async parse<T>(response: Response): Promise<T> {
    if (response.ok) return (await response.json()) as T;
    let body: ApiErrorJson;
    try {
      body = (await response.json()) as ApiErrorJson;
    } catch {
      body = { code: "http_error", message: `HTTP ${response.status}` };
    }
    throw new ApiRequestError(response.status, body);
  }

  async getTypes(): Promise<string[]> {
    const response = await this.fetchImpl(`${this.base}/types`);
    const body = await this.parse<{ types: string[] }>(response);
    return body.types;
  }

  async getDatasets(): Promise<DatasetInfoJson[]> {
    const response = await this.fetchImpl(`${this.base}/datasets`);
    const body = await this.parse<{ datasets: DatasetInfoJson[] }>(response);
    return body.datasets;
  }

  async uploadDataset(
    file: Blob, filename: string, name: string, fps?: number
  ): Promise<{ datasetId: string; status: string }> {
    const form = new FormData();
    form.append("file", file, filename);
    form.append("name", name);
    if (fps !== undefined) form.append("fps", String(fps));
    const response = await this.fetchImpl(`${this.base}/datasets`, {
      method: "POST",
      body: form,
    });
    return this.parse(response);
  }

  async runQuery(request: QueryRequestJson): Promise<QueryResponseJson> {
    const response = await this.fetchImpl(`${this.base}/queries`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    return this.parse(response);
  }

  async getResults(queryId: string): Promise<QueryResponseJson> {
    const response = await this.fetchImpl(`${this.base}/results/${queryId}`);
    return this.parse(response);
  }
}
