"""
Permission classes for lab app.
"""

from rest_framework.permissions import BasePermission, SAFE_METHODS


class RunPermission(BasePermission):
    """
    Allow anyone to read run records.
    Only staff can delete them.
    """

    def has_permission(self, request, view):
        if request.method in SAFE_METHODS:
            return True
        return bool(request.user and request.user.is_staff)

    def has_object_permission(self, request, view, obj):
        if request.method in SAFE_METHODS:
            return True
        return bool(request.user and request.user.is_staff)
