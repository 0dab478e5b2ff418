import { defineConfig } from "vitest/config";

export default defineConfig({
    test: {
        // child-process pool: the worker-threads pool inflates pipe-event
        // latency and skews the boundary-overhead measurement
        pool: "forks",
        testTimeout: 120_000,
        hookTimeout: 180_000,
    },
});
