package org.elasticsearch.xpack.esql.enrich;

import java.util.HashMap;
import java.util.Map;
import java.util.Set;

import org.elasticsearch.action.ActionListener;

/**
 * Resolves enrich policies by name and records the resolved policies
 * in an enrich resolution.
 */
public class EnrichPolicyResolver {
    private final Map<String, EnrichPolicy> policies = new HashMap<>();
    private final String clusterAlias;

    public EnrichPolicyResolver(String clusterAlias) {
        this.clusterAlias = clusterAlias;
    }

    public void register(EnrichPolicy policy) {
        policies.put(policy.name(), policy);
    }

    public <T> void resolve(String policyName, EnrichResolution resolution, ActionListener<T> listener) {
        EnrichPolicy policy = policies.get(policyName);
        if (policy == null) {
            resolution.addError(policyName, "unresolved enrich policy in " + clusterAlias);
        } else {
            resolution.addResolvedPolicy(policyName, policy);
        }
    }

    public EnrichResolution resolveAll(Set<String> policyNames) {
        EnrichResolution resolution = new EnrichResolution();
        for (String policyName : policyNames) {
            resolve(policyName, resolution, null);
        }
        return resolution;
    }
}
