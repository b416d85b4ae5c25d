import { describe, expect, it, vi } from "vitest";

import { RenderScheduler } from "../src/render.js";

/** Manually resolvable mock service call. */
function makeRun() {
  const resolvers: Array<() => void> = [];
  const run = vi.fn(
    () =>
      new Promise<void>((resolve) => {
        resolvers.push(resolve);
      }),
  );
  return { run, resolvers };
}

async function flush(): Promise<void> {
  await Promise.resolve();
  await Promise.resolve();
}

describe("render scheduler", () => {
  it("debounces a burst of edits into one request", async () => {
    vi.useFakeTimers();
    const { run, resolvers } = makeRun();
    const scheduler = new RenderScheduler(() => run(), { debounceMs: 100 });
    scheduler.request();
    vi.advanceTimersByTime(50);
    scheduler.request();
    scheduler.request();
    vi.advanceTimersByTime(99);
    expect(run).toHaveBeenCalledTimes(0);
    vi.advanceTimersByTime(1);
    expect(run).toHaveBeenCalledTimes(1);
    resolvers[0]();
    await flush();
    vi.advanceTimersByTime(1000);
    expect(run).toHaveBeenCalledTimes(1);
    vi.useRealTimers();
  });

  it("keeps at most one request in flight and fires exactly one follow-up after an in-flight edit", async () => {
    vi.useFakeTimers();
    const { run, resolvers } = makeRun();
    const scheduler = new RenderScheduler(() => run(), { debounceMs: 10 });

    scheduler.request();
    vi.advanceTimersByTime(10);
    expect(run).toHaveBeenCalledTimes(1);
    expect(scheduler.busy).toBe(true);

    // three edits while the first render is still in flight
    scheduler.request();
    scheduler.request();
    scheduler.request();
    vi.advanceTimersByTime(1000);
    expect(run).toHaveBeenCalledTimes(1); // still only the original request

    resolvers[0]();
    await flush();
    vi.advanceTimersByTime(10); // trailing request goes through its debounce
    expect(run).toHaveBeenCalledTimes(2);

    resolvers[1]();
    await flush();
    vi.advanceTimersByTime(1000);
    expect(run).toHaveBeenCalledTimes(2); // no extra trailing request
    vi.useRealTimers();
  });

  it("quiet scheduler issues nothing", () => {
    vi.useFakeTimers();
    const { run } = makeRun();
    new RenderScheduler(() => run(), { debounceMs: 10 });
    vi.advanceTimersByTime(10_000);
    expect(run).toHaveBeenCalledTimes(0);
    vi.useRealTimers();
  });

  it("recovers after a failed render and still honors trailing edits", async () => {
    vi.useFakeTimers();
    let calls = 0;
    const scheduler = new RenderScheduler(
      () => {
        calls += 1;
        return calls === 1 ? Promise.reject(new Error("boom")) : Promise.resolve();
      },
      { debounceMs: 10 },
    );
    scheduler.request();
    vi.advanceTimersByTime(10);
    scheduler.request(); // edit while the failing render is in flight
    await flush();
    vi.advanceTimersByTime(10);
    await flush();
    expect(calls).toBe(2);
    vi.useRealTimers();
  });
});
